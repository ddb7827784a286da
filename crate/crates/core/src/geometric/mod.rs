//! Orientation-searching methods: template matching with rotated plate
//! templates and adaptive plane morphology with a cone-restricted search.
//!
//! Both work on the inverted volume, so cracks are bright. Rotated plates
//! are rasterized separably: in-plane offsets `round(i u) + round(j v)` and
//! normal offsets `round(t d)` are rounded independently and added.

mod adaptive;
mod directions;
mod template;

pub use adaptive::{adaptive_difference, adaptive_morph, adaptive_threshold, AdaptiveMorphParams};
pub use directions::{axial_angle, plane_basis, sphere_directions, DirectionSet};
pub use template::{template_match, template_response, TemplateParams};
