//! Immutable description of the backbone chain: zero-position axes and body
//! vectors, the atoms rigidly carried by each link, and the nonbonded pair
//! list derived from them.
//!
//! Links are numbered by how many joints sit between them and the fixed
//! N-terminus: link 0 is the base, link `j` (1 ≤ j ≤ 2N) turns with joints
//! `1..=j`. Joint `j` is anchored at `r_j = b_1 + … + b_{j-1}` (the N atom for
//! odd `j`, the Cα atom for even `j`), and atoms of link `j` are stored as
//! zero-position offsets from that anchor. The peptide plane `p` is link `2p`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::linalg::Vec3;
use crate::units::COULOMB_KCAL_A;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Copy + Serialize + serde::de::DeserializeOwned")]
pub struct Atom<T> {
    pub name: String,
    pub element: String,
    /// Zero-position offset from the link anchor (Å).
    pub offset: Vec3<T>,
    /// Partial charge (e).
    pub charge: T,
    /// LJ well depth (kcal/mol).
    pub lj_epsilon: T,
    /// LJ radius (Å); pair minimum distance is the sum of the two radii.
    pub lj_radius: T,
}

/// Atoms rigidly attached to one link of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Copy + Serialize + serde::de::DeserializeOwned")]
pub struct AtomGroup<T> {
    pub link: usize,
    #[serde(default)]
    pub label: String,
    pub atoms: Vec<Atom<T>>,
}

/// One included nonbonded pair with its mixed parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairParams<T> {
    pub a: usize,
    pub b: usize,
    /// `k_e q_a q_b` (kcal·Å/mol).
    pub coulomb: T,
    pub epsilon: T,
    pub sigma: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FlatAtom<T> {
    pub link: usize,
    pub offset: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTopology<T> {
    n_planes: usize,
    zero_unit_axes: Vec<Vec3<T>>,
    zero_body_vectors: Vec<Vec3<T>>,
    groups: Vec<AtomGroup<T>>,
    exclusion_span: usize,
    flat: Vec<FlatAtom<T>>,
    names: Vec<String>,
    elements: Vec<String>,
    pairs: Vec<PairParams<T>>,
}

/// Serialized form of a topology (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub n_planes: usize,
    /// Pairs whose links differ by at most this many are excluded.
    #[serde(default = "default_exclusion_span")]
    pub exclusion_span: usize,
    pub zero_unit_axes: Vec<[f64; 3]>,
    pub zero_body_vectors: Vec<[f64; 3]>,
    pub groups: Vec<AtomGroup<f64>>,
}

fn default_exclusion_span() -> usize {
    2
}

pub const DEFAULT_N_PLANES: usize = 10;

impl<T: Scalar> ChainTopology<T> {
    pub fn new(
        n_planes: usize,
        zero_unit_axes: Vec<Vec3<T>>,
        zero_body_vectors: Vec<Vec3<T>>,
        mut groups: Vec<AtomGroup<T>>,
        exclusion_span: usize,
    ) -> Result<Self> {
        let dof = 2 * (n_planes + 1);
        if zero_unit_axes.len() != dof {
            return Err(KcmError::Topology(format!(
                "expected {dof} unit axes for {n_planes} planes, got {}",
                zero_unit_axes.len()
            )));
        }
        if zero_body_vectors.len() != dof {
            return Err(KcmError::Topology(format!(
                "expected {dof} body vectors for {n_planes} planes, got {}",
                zero_body_vectors.len()
            )));
        }
        let tol = T::lit(1e-6);
        let mut axes = Vec::with_capacity(dof);
        for (j, u) in zero_unit_axes.iter().enumerate() {
            if !u.is_finite() || (u.norm() - T::one()).abs() > tol {
                return Err(KcmError::Topology(format!(
                    "unit axis {} has norm {}",
                    j + 1,
                    u.norm()
                )));
            }
            // renormalize so rotations stay orthonormal to machine precision
            axes.push(*u * u.norm().recip());
        }
        if zero_body_vectors.iter().any(|b| !b.is_finite()) {
            return Err(KcmError::Topology("non-finite body vector".into()));
        }
        groups.sort_by_key(|g| g.link);
        for w in groups.windows(2) {
            if w[0].link == w[1].link {
                return Err(KcmError::Topology(format!(
                    "link {} has more than one atom group",
                    w[0].link
                )));
            }
        }
        if let Some(g) = groups.iter().find(|g| g.link > dof) {
            return Err(KcmError::Topology(format!(
                "atom group on link {} but chain has only {dof} joints",
                g.link
            )));
        }
        for g in &groups {
            for a in &g.atoms {
                if !(a.offset.is_finite()
                    && a.charge.is_finite()
                    && a.lj_epsilon.is_finite()
                    && a.lj_radius.is_finite())
                {
                    return Err(KcmError::Topology(format!(
                        "atom {} on link {} has non-finite parameters",
                        a.name, g.link
                    )));
                }
                if a.lj_epsilon < T::zero() || a.lj_radius < T::zero() {
                    return Err(KcmError::Topology(format!(
                        "atom {} on link {} has negative LJ parameters",
                        a.name, g.link
                    )));
                }
            }
        }

        let mut flat = Vec::new();
        let mut names = Vec::new();
        let mut elements = Vec::new();
        let mut params = Vec::new();
        for g in &groups {
            for a in &g.atoms {
                flat.push(FlatAtom {
                    link: g.link,
                    offset: a.offset,
                });
                names.push(a.name.clone());
                elements.push(a.element.clone());
                params.push((a.charge, a.lj_epsilon, a.lj_radius));
            }
        }
        let ke = T::lit(COULOMB_KCAL_A);
        let mut pairs = Vec::new();
        for a in 0..flat.len() {
            for b in (a + 1)..flat.len() {
                if flat[a].link.abs_diff(flat[b].link) <= exclusion_span {
                    continue;
                }
                let (qa, ea, ra) = params[a];
                let (qb, eb, rb) = params[b];
                pairs.push(PairParams {
                    a,
                    b,
                    coulomb: ke * qa * qb,
                    epsilon: (ea * eb).sqrt(),
                    sigma: ra + rb,
                });
            }
        }

        Ok(Self {
            n_planes,
            zero_unit_axes: axes,
            zero_body_vectors,
            groups,
            exclusion_span,
            flat,
            names,
            elements,
            pairs,
        })
    }

    /// Number of peptide planes (N − 1).
    pub fn n_planes(&self) -> usize {
        self.n_planes
    }

    /// Number of dihedral degrees of freedom, 2N.
    pub fn dof(&self) -> usize {
        2 * (self.n_planes + 1)
    }

    pub fn zero_unit_axes(&self) -> &[Vec3<T>] {
        &self.zero_unit_axes
    }

    pub fn zero_body_vectors(&self) -> &[Vec3<T>] {
        &self.zero_body_vectors
    }

    pub fn groups(&self) -> &[AtomGroup<T>] {
        &self.groups
    }

    pub fn exclusion_span(&self) -> usize {
        self.exclusion_span
    }

    pub fn n_atoms(&self) -> usize {
        self.flat.len()
    }

    pub fn atom_link(&self, atom: usize) -> usize {
        self.flat[atom].link
    }

    pub fn atom_name(&self, atom: usize) -> &str {
        &self.names[atom]
    }

    pub fn atom_element(&self, atom: usize) -> &str {
        &self.elements[atom]
    }

    pub(crate) fn flat_atoms(&self) -> &[FlatAtom<T>] {
        &self.flat
    }

    pub fn pairs(&self) -> &[PairParams<T>] {
        &self.pairs
    }

    /// Flat indices of atoms carried by the distal-most link (joint 2N).
    pub fn last_link_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        let last = self.dof();
        self.flat
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.link == last)
            .map(|(i, _)| i)
    }

    /// Zero-position anchors `r_j^0`, j = 1..=2N.
    pub fn zero_joint_positions(&self) -> Vec<Vec3<T>> {
        let mut acc = Vec3::zero();
        self.zero_body_vectors
            .iter()
            .map(|b| {
                let here = acc;
                acc += *b;
                here
            })
            .collect()
    }

    /// Zero-position Cartesian coordinates of every atom.
    pub fn zero_atom_positions(&self) -> Vec<Vec3<T>> {
        let anchors = self.zero_joint_positions();
        self.flat
            .iter()
            .map(|a| {
                let base = if a.link == 0 {
                    Vec3::zero()
                } else {
                    anchors[a.link - 1]
                };
                base + a.offset
            })
            .collect()
    }

    /// Same topology with every atom's nonbonded parameters mapped through `f`.
    pub fn map_atoms(&self, mut f: impl FnMut(&Atom<T>) -> Atom<T>) -> Result<Self> {
        let groups = self
            .groups
            .iter()
            .map(|g| AtomGroup {
                link: g.link,
                label: g.label.clone(),
                atoms: g.atoms.iter().map(&mut f).collect(),
            })
            .collect();
        Self::new(
            self.n_planes,
            self.zero_unit_axes.clone(),
            self.zero_body_vectors.clone(),
            groups,
            self.exclusion_span,
        )
    }

    /// Copy with all charges and LJ depths set to zero.
    pub fn without_interactions(&self) -> Self {
        self.map_atoms(|a| Atom {
            charge: T::zero(),
            lj_epsilon: T::zero(),
            ..a.clone()
        })
        .expect("zeroed parameters stay valid")
    }

    pub fn cast<U: Scalar>(&self) -> ChainTopology<U> {
        let groups = self
            .groups
            .iter()
            .map(|g| AtomGroup {
                link: g.link,
                label: g.label.clone(),
                atoms: g
                    .atoms
                    .iter()
                    .map(|a| Atom {
                        name: a.name.clone(),
                        element: a.element.clone(),
                        offset: a.offset.cast(),
                        charge: U::lit(a.charge.to_f64_lossy()),
                        lj_epsilon: U::lit(a.lj_epsilon.to_f64_lossy()),
                        lj_radius: U::lit(a.lj_radius.to_f64_lossy()),
                    })
                    .collect(),
            })
            .collect();
        ChainTopology::new(
            self.n_planes,
            self.zero_unit_axes.iter().map(Vec3::cast).collect(),
            self.zero_body_vectors.iter().map(Vec3::cast).collect(),
            groups,
            self.exclusion_span,
        )
        .expect("cast of a valid topology is valid")
    }

    /// Default extended backbone with `n_planes` peptide planes.
    pub fn default_peptide(n_planes: usize) -> Self {
        build_default(n_planes).cast()
    }

    pub fn to_file(&self) -> TopologyFile {
        let f64_topo: ChainTopology<f64> = self.cast();
        TopologyFile {
            n_planes: self.n_planes,
            exclusion_span: self.exclusion_span,
            zero_unit_axes: f64_topo.zero_unit_axes.iter().map(|v| v.to_array()).collect(),
            zero_body_vectors: f64_topo
                .zero_body_vectors
                .iter()
                .map(|v| v.to_array())
                .collect(),
            groups: f64_topo.groups,
        }
    }

    pub fn from_file(file: TopologyFile) -> Result<Self> {
        let t = ChainTopology::<f64>::new(
            file.n_planes,
            file.zero_unit_axes.into_iter().map(Vec3::from).collect(),
            file.zero_body_vectors.into_iter().map(Vec3::from).collect(),
            file.groups,
            file.exclusion_span,
        )?;
        Ok(t.cast())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: TopologyFile = toml::from_str(s).map_err(|e| KcmError::Parse {
            path: "<topology>".into(),
            message: e.to_string(),
        })?;
        Self::from_file(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file()).expect("topology serializes to TOML")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| KcmError::io(path, e))?;
        let file: TopologyFile = toml::from_str(&text).map_err(|e| KcmError::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| KcmError::io(path, e))
    }
}

impl<T: Scalar> Default for ChainTopology<T> {
    fn default() -> Self {
        Self::default_peptide(DEFAULT_N_PLANES)
    }
}

// Backbone bond lengths (Å) and bond angles (degrees).
const BOND_N_CA: f64 = 1.47;
const BOND_CA_C: f64 = 1.53;
const BOND_C_N: f64 = 1.32;
const BOND_C_O: f64 = 1.23;
const BOND_C_OXT: f64 = 1.25;
const BOND_N_H: f64 = 1.01;
const ANGLE_AT_CA: f64 = 111.0;
const ANGLE_AT_C: f64 = 116.0;
const ANGLE_AT_N: f64 = 122.0;

// (charge e, epsilon kcal/mol, radius Å)
const PARAM_N: (f64, f64, f64) = (-0.47, 0.20, 1.85);
const PARAM_H: (f64, f64, f64) = (0.31, 0.046, 0.2245);
const PARAM_CA: (f64, f64, f64) = (0.07, 0.02, 2.275);
const PARAM_C: (f64, f64, f64) = (0.51, 0.11, 2.0);
const PARAM_O: (f64, f64, f64) = (-0.51, 0.12, 1.70);

fn atom(name: &str, element: &str, offset: Vec3<f64>, p: (f64, f64, f64)) -> Atom<f64> {
    Atom {
        name: name.into(),
        element: element.into(),
        offset,
        charge: p.0,
        lj_epsilon: p.1,
        lj_radius: p.2,
    }
}

/// In-plane bisector pointing away from two bonded neighbours.
fn outward(center: Vec3<f64>, n1: Vec3<f64>, n2: Vec3<f64>) -> Vec3<f64> {
    let a = (n1 - center).normalized().expect("distinct atoms");
    let b = (n2 - center).normalized().expect("distinct atoms");
    (-(a + b)).normalized().expect("non-collinear neighbours")
}

/// Planar all-trans zigzag in the xy plane, rotated so the end-to-end
/// vector points along +x.
fn build_default(n_planes: usize) -> ChainTopology<f64> {
    let residues = n_planes + 1;
    // virtual C before N1, backbone N, CA, C per residue, virtual N after the last C
    let n_walk = 3 * residues + 2;
    let lengths = [BOND_C_N, BOND_N_CA, BOND_CA_C];
    let angles = [ANGLE_AT_N, ANGLE_AT_CA, ANGLE_AT_C];
    let mut walk = vec![Vec3::<f64>::zero()];
    let mut heading: f64 = 0.0;
    for k in 0..n_walk - 1 {
        let step = Vec3::new(heading.cos(), heading.sin(), 0.0) * lengths[k % 3];
        let next = walk[k] + step;
        walk.push(next);
        // turn at the atom just reached; alternate sides for the trans zigzag
        let turn = (180.0 - angles[k % 3]).to_radians();
        heading += if k % 2 == 0 { turn } else { -turn };
    }
    let origin = walk[1];
    let end = walk[3 * residues] - origin;
    let tilt = end.y.atan2(end.x);
    let (s, c) = (-tilt).sin_cos();
    let pts: Vec<Vec3<f64>> = walk
        .iter()
        .map(|w| {
            let p = *w - origin;
            Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, 0.0)
        })
        .collect();
    let prev_c = pts[0];
    let pts = &pts[1..];

    let n_at = |i: usize| pts[3 * i];
    let ca_at = |i: usize| pts[3 * i + 1];
    let c_at = |i: usize| pts[3 * i + 2];

    let mut axes = Vec::with_capacity(2 * residues);
    let mut body = Vec::with_capacity(2 * residues);
    for i in 0..residues {
        axes.push((ca_at(i) - n_at(i)).normalized().expect("bond"));
        axes.push((c_at(i) - ca_at(i)).normalized().expect("bond"));
        body.push(ca_at(i) - n_at(i));
        if i + 1 < residues {
            body.push(n_at(i + 1) - ca_at(i));
        } else {
            body.push(c_at(i) - ca_at(i));
        }
    }

    let h1 = outward(n_at(0), prev_c, ca_at(0)) * BOND_N_H;
    let mut groups = vec![AtomGroup {
        link: 0,
        label: "N-terminus".into(),
        atoms: vec![
            atom("N", "N", Vec3::zero(), PARAM_N),
            atom("H", "H", h1, PARAM_H),
        ],
    }];
    for i in 0..residues {
        groups.push(AtomGroup {
            link: 2 * i + 1,
            label: format!("CA{}", i + 1),
            atoms: vec![atom("CA", "C", ca_at(i) - n_at(i), PARAM_CA)],
        });
        let anchor = ca_at(i);
        let c = c_at(i);
        let next_n = pts[3 * i + 3];
        let o = c + outward(c, ca_at(i), next_n) * BOND_C_O;
        if i + 1 < residues {
            let next_ca = pts[3 * i + 4];
            let h = next_n + outward(next_n, c, next_ca) * BOND_N_H;
            groups.push(AtomGroup {
                link: 2 * i + 2,
                label: format!("plane{}", i + 1),
                atoms: vec![
                    atom("C", "C", c - anchor, PARAM_C),
                    atom("O", "O", o - anchor, PARAM_O),
                    atom("N", "N", next_n - anchor, PARAM_N),
                    atom("H", "H", h - anchor, PARAM_H),
                ],
            });
        } else {
            let oxt = c + (next_n - c).normalized().expect("bond") * BOND_C_OXT;
            groups.push(AtomGroup {
                link: 2 * i + 2,
                label: "C-terminus".into(),
                atoms: vec![
                    atom("C", "C", c - anchor, PARAM_C),
                    atom("O", "O", o - anchor, PARAM_O),
                    atom("OXT", "O", oxt - anchor, PARAM_O),
                ],
            });
        }
    }
    ChainTopology::new(n_planes, axes, body, groups, default_exclusion_span())
        .expect("default topology is valid")
}
