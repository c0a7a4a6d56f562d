//! Self-linking number, contact margins and certificates, and the
//! action-sign obstruction.

mod contact;
mod linking;

pub use contact::{
    action_sign_obstruction, certify_contact, check_primitive, contact_margin, orbit_sign_obstruction, reconcile,
    CertificateResult, CertificateStatus, Obstruction,
};
pub use linking::{default_lk_scheme, linking_number, DomainSide, LinkResult};
