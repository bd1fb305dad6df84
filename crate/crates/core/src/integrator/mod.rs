//! The integral layers: H-valued integrals against one real martingale,
//! ℓ²(H)-valued integrals against a standard sequence, the ℓ²_λ wrapper, and
//! the general L₂⁰(H)-valued integral against a U-valued Lévy process.

mod bracket;
mod integrand;
mod ito;

pub use bracket::{angle_bracket, covariation_integral, energy, BracketPath};
pub use integrand::{
    realize, Carrier, GridIntegrand, Integrand, PathSource, PathView, Realized, Sampling, SimpleIntegrand,
};
pub use ito::{
    ito_general, ito_general_realized, ito_h, ito_h_in_basis, ito_h_realized, ito_l2lambda, ito_seq,
    ito_seq_ordered, ito_seq_realized, seq_terms_realized, series_terms, series_terms_realized,
    simple_closed_form_h, simple_closed_form_operator, simple_closed_form_seq, IntegralPath,
};
pub(crate) use ito::sum_terms;
