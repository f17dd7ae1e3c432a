//! Unit constants. Internal units are Å, kcal/mol and radians; tweezer
//! inputs arrive in pN and nm.

/// Coulomb constant in kcal·Å/(mol·e²).
pub const COULOMB_KCAL_A: f64 = 332.0636;

/// 1 pN·nm expressed in kcal/mol.
pub const PN_NM_TO_KCAL_MOL: f64 = 0.143_932_6;

/// 1 pN expressed in kcal/(mol·Å).
pub const PN_TO_KCAL_MOL_A: f64 = PN_NM_TO_KCAL_MOL / 10.0;

pub const ANGSTROM_PER_NM: f64 = 10.0;

/// Interatomic distances below this (Å) are treated as a singular configuration.
pub const MIN_PAIR_DISTANCE: f64 = 0.1;
