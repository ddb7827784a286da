//! Ground-truthed synthetic crack volumes: rough crack surfaces, a
//! concrete-like background, compositing and dataset assembly.

mod composite;
mod crack;
mod dataset;
mod fbs;
mod phantom;

pub use composite::{composite, CompositeParams};
pub use crack::{
    crack_mask, rasterize_crack, rasterize_surface, Arrangement, CrackSpec, HeightAxis,
};
pub use dataset::{
    assign_splits, generate_dataset, generate_pair, Background, EntrySeeds, GeneratedPair,
    Manifest, ManifestEntry, PhantomPreset, Recipe, RecipeEntry, Split, StandardRecipe,
    MANIFEST_FILE,
};
pub use fbs::{simulate_fbs, structure_function, FbsField};
pub use phantom::{
    synthesize_background, synthesize_phantom, GrayStats, Inclusions, Phantom, PhantomSpec,
    PHASE_AGGREGATE, PHASE_MATRIX, PHASE_PORE,
};
