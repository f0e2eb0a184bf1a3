//! Regenerates `data/diffusion_observations.json` (seed 0).

use gsvgd::model::{ConditionedDiffusion, DiffusionObservations};
use gsvgd::rng::seeded;

fn main() {
    let seed = 0;
    let sigma_obs = ConditionedDiffusion::SIGMA_OBS;
    let (w_true, y) = ConditionedDiffusion::generate_observations(sigma_obs, &mut seeded(seed));
    let obs = DiffusionObservations { seed, sigma_obs, w_true, y };
    println!("{}", serde_json::to_string_pretty(&obs).expect("serializable"));
}
