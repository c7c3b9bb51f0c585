//! Heavy-tailed randomness: symmetric stable samplers, integer laws in a
//! stable domain of attraction, Lévy motion at finite time sets, and the
//! scenery characteristic functions.

mod cf;
mod doa;
mod levy;
mod params;
mod stable;

pub use cf::{lambda_bar, model_cf, ModelCf};
pub use doa::{gaussian_pmf, sample_doa, DoaLaw, DoaSampler, PmfTable};
pub use levy::{levy_eval_at, LevyPath};
pub use params::{SimParams, DEFAULT_KAPPA};
pub use stable::{sample_sas, unit_sas, StableLaw};
