//! Certified reproduction of the classification of repdigits that are
//! products of three k-generalized Lucas numbers.
//!
//! The crate is organised bottom-up:
//!
//! * [`cert`]: ball arithmetic with certified radii and logarithms.
//! * [`lucas`]: exact `L_n^{(k)}`, repdigit recognition, 2-/5-adic valuations.
//! * [`root`]: the dominant root `α(k)`, `f_k(α)` and height budgets.
//! * [`bounds`]: Matveev-type lower bounds chained into bounds on `l, m, n, k`.
//! * [`contfrac`]: certified continued fractions and convergents.
//! * [`reduce`]: the Baker–Davenport reduction and its campaigns.
//! * [`search`]: the exhaustive sweeps.
//! * [`certificate`] and [`pipeline`]: stage orchestration and emitted records.

pub mod bounds;
pub mod cert;
pub mod certificate;
pub mod contfrac;
pub mod error;
pub mod lucas;
pub mod pipeline;
pub mod reduce;
pub mod root;
pub mod search;

pub use cert::{CertReal, Ctx};
pub use error::{Error, Result};
pub use lucas::{
    as_repdigit, closed_form_small, klucas, klucas_window, valuation, verify_solution, KIndex,
    Repdigit, SolutionRecord, ValuationPrime, PUBLISHED_SOLUTIONS,
};
pub use bounds::{bound_l, bound_m, bound_n, case_n_le_k, BoundChain, BoundSource};
pub use certificate::{emit_certificate, ProofCertificate, StageRecord};
pub use contfrac::{CFExpansion, CfStream, CfTarget, Convergent};
pub use pipeline::{prove_all, PipelineConfig, ProofOutcome};
pub use reduce::{
    reduce_once, reduce_with_retry, Campaign, CampaignConfig, ReductionInstance, ReductionOutcome, Status,
};
pub use search::{corollaries, sweep, sweep_small, sweep_verify, SweepConfig};
pub use root::{approx_defect, dominant_root, psi_eval, DominantRoot, FormCase, HeightBudget};
