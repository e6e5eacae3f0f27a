//! POC-set algebra, mobility, constraint degree and coupling degree over a
//! declared topology.
//!
//! Direction semantics are symbolic: each translation or rotation is an axis
//! label, distinct labels are independent, and three independent labels span
//! the whole space. A topology file names elementary POC sets, builds each
//! branch as their union, and lists the loops of one SOC decomposition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("malformed topology file: {0}")]
    Parse(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("not an Assur kinematic chain: constraint degrees sum to {0}")]
    NotAnAKC(i64),
}

/// Span of a set of independent axis labels, saturating at three.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Span {
    Labels(BTreeSet<String>),
    Full,
}

impl Span {
    pub fn empty() -> Self {
        Span::Labels(BTreeSet::new())
    }

    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::saturate(labels.into_iter().map(Into::into).collect())
    }

    fn saturate(labels: BTreeSet<String>) -> Self {
        if labels.len() >= 3 {
            Span::Full
        } else {
            Span::Labels(labels)
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Span::Labels(l) => l.len(),
            Span::Full => 3,
        }
    }

    pub fn union(&self, other: &Span) -> Span {
        match (self, other) {
            (Span::Labels(a), Span::Labels(b)) => Self::saturate(a | b),
            _ => Span::Full,
        }
    }

    pub fn intersect(&self, other: &Span) -> Span {
        match (self, other) {
            (Span::Full, x) | (x, Span::Full) => x.clone(),
            (Span::Labels(a), Span::Labels(b)) => Span::Labels(a & b),
        }
    }
}

/// Position and orientation characteristic set: independent translations
/// `t` and rotations `r` of an end link.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PocSet {
    pub t: Span,
    pub r: Span,
}

impl PocSet {
    pub fn new(t: Span, r: Span) -> Self {
        Self { t, r }
    }

    pub fn dim(&self) -> usize {
        self.t.dim() + self.r.dim()
    }

    pub fn is_pure_translation(&self) -> bool {
        self.t.dim() == 3 && self.r.dim() == 0
    }
}

pub fn poc_union(a: &PocSet, b: &PocSet) -> PocSet {
    PocSet::new(a.t.union(&b.t), a.r.union(&b.r))
}

pub fn poc_intersect(a: &PocSet, b: &PocSet) -> PocSet {
    PocSet::new(a.t.intersect(&b.t), a.r.intersect(&b.r))
}

fn superscript(n: usize) -> char {
    ['⁰', '¹', '²', '³'][n.min(3)]
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", superscript(self.dim()))?;
        if let Span::Labels(l) = self {
            if !l.is_empty() {
                let names: Vec<&str> = l.iter().map(String::as_str).collect();
                write!(f, "({})", names.join(","))?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for PocSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{} r{}", self.t, self.r)
    }
}

impl Serialize for PocSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let labels = |span: &Span| match span {
            Span::Labels(l) => Some(l.iter().cloned().collect::<Vec<_>>()),
            Span::Full => None,
        };
        let mut st = s.serialize_struct("PocSet", 5)?;
        st.serialize_field("t_dim", &self.t.dim())?;
        st.serialize_field("r_dim", &self.r.dim())?;
        st.serialize_field("t_axes", &labels(&self.t))?;
        st.serialize_field("r_axes", &labels(&self.r))?;
        st.serialize_field("text", &self.to_string())?;
        st.end()
    }
}

/// Independent displacement equations of one loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LoopEquations {
    Declared(u32),
    /// Dimension of the union of the named sets or branches.
    Union(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopSpec {
    pub name: String,
    pub sum_f: u32,
    pub actuated: u32,
    pub xi: LoopEquations,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismTopology {
    pub name: String,
    pub sets: BTreeMap<String, PocSet>,
    /// Branch name and its POC set, in file order.
    pub branches: Vec<(String, PocSet)>,
    pub loops: Vec<LoopSpec>,
    pub total_f: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSet {
    name: String,
    #[serde(default)]
    t: Vec<String>,
    #[serde(default)]
    r: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    name: String,
    elements: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoop {
    name: String,
    sum_f: u32,
    actuated: u32,
    xi: Option<u32>,
    xi_union: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    name: String,
    total_f: Option<u32>,
    #[serde(default)]
    sets: Vec<RawSet>,
    branches: Vec<RawBranch>,
    loops: Vec<RawLoop>,
}

fn invalid(msg: impl Into<String>) -> TopologyError {
    TopologyError::InvalidTopology(msg.into())
}

impl MechanismTopology {
    pub fn from_toml_str(text: &str) -> Result<Self, TopologyError> {
        let raw: RawTopology =
            toml::from_str(text).map_err(|e| TopologyError::Parse(e.message().to_string()))?;

        let mut sets = BTreeMap::new();
        for s in raw.sets {
            let poc = PocSet::new(Span::from_labels(s.t), Span::from_labels(s.r));
            if sets.insert(s.name.clone(), poc).is_some() {
                return Err(TopologyError::Parse(format!("duplicate set `{}`", s.name)));
            }
        }

        let mut branches: Vec<(String, PocSet)> = Vec::new();
        for b in raw.branches {
            if b.elements.is_empty() {
                return Err(invalid(format!("branch `{}` has no elements", b.name)));
            }
            if sets.contains_key(&b.name) || branches.iter().any(|(n, _)| *n == b.name) {
                return Err(TopologyError::Parse(format!("duplicate name `{}`", b.name)));
            }
            let mut poc = PocSet::new(Span::empty(), Span::empty());
            for e in &b.elements {
                let s = sets
                    .get(e)
                    .ok_or_else(|| TopologyError::Parse(format!("unknown set `{e}`")))?;
                poc = poc_union(&poc, s);
            }
            branches.push((b.name, poc));
        }
        if branches.is_empty() {
            return Err(invalid("no branches"));
        }

        let mut loops = Vec::new();
        for l in raw.loops {
            let xi = match (l.xi, l.xi_union) {
                (Some(x), None) => LoopEquations::Declared(x),
                (None, Some(u)) if !u.is_empty() => LoopEquations::Union(u),
                _ => {
                    return Err(TopologyError::Parse(format!(
                        "loop `{}` needs exactly one of `xi` or a non-empty `xi_union`",
                        l.name
                    )))
                }
            };
            loops.push(LoopSpec {
                name: l.name,
                sum_f: l.sum_f,
                actuated: l.actuated,
                xi,
            });
        }
        if loops.is_empty() {
            return Err(invalid("no loops"));
        }

        let total_f = raw
            .total_f
            .unwrap_or_else(|| loops.iter().map(|l| l.sum_f).sum());
        let topo = Self {
            name: raw.name,
            sets,
            branches,
            loops,
            total_f,
        };
        for l in &topo.loops {
            let xi = topo.loop_xi(l)?;
            if !(1..=6).contains(&xi) || xi > l.sum_f {
                return Err(invalid(format!(
                    "loop `{}`: need 1 <= xi <= min(6, sum_f), got xi = {xi}, sum_f = {}",
                    l.name, l.sum_f
                )));
            }
        }
        Ok(topo)
    }

    fn lookup(&self, name: &str) -> Result<&PocSet, TopologyError> {
        self.sets
            .get(name)
            .or_else(|| self.branches.iter().find(|(n, _)| n == name).map(|(_, p)| p))
            .ok_or_else(|| TopologyError::Parse(format!("unknown set or branch `{name}`")))
    }

    /// `ξ` of one loop, declared or from the union dimension.
    pub fn loop_xi(&self, l: &LoopSpec) -> Result<u32, TopologyError> {
        match &l.xi {
            LoopEquations::Declared(x) => Ok(*x),
            LoopEquations::Union(names) => {
                let mut poc = PocSet::new(Span::empty(), Span::empty());
                for n in names {
                    poc = poc_union(&poc, self.lookup(n)?);
                }
                Ok(poc.dim() as u32)
            }
        }
    }

    pub fn xis(&self) -> Result<Vec<u32>, TopologyError> {
        self.loops.iter().map(|l| self.loop_xi(l)).collect()
    }

    /// Intersection of all branch POC sets.
    pub fn platform_poc(&self) -> PocSet {
        let mut it = self.branches.iter().map(|(_, p)| p);
        let first = it.next().cloned().expect("at least one branch");
        it.fold(first, |acc, p| poc_intersect(&acc, p))
    }
}

/// `F = Σf - Σξ`.
pub fn dof(topo: &MechanismTopology) -> Result<i64, TopologyError> {
    let xi: i64 = topo.xis()?.iter().map(|&x| x as i64).sum();
    let f = topo.total_f as i64 - xi;
    if f < 0 {
        return Err(invalid(format!("negative mobility {f}")));
    }
    Ok(f)
}

/// `Δ_j = Σf_j - I_j - ξ_j` for each loop; the sum must vanish.
pub fn constraint_degrees(topo: &MechanismTopology) -> Result<Vec<i64>, TopologyError> {
    let xis = topo.xis()?;
    let deltas: Vec<i64> = topo
        .loops
        .iter()
        .zip(xis)
        .map(|(l, xi)| l.sum_f as i64 - l.actuated as i64 - xi as i64)
        .collect();
    let total: i64 = deltas.iter().sum();
    if total != 0 {
        return Err(TopologyError::NotAnAKC(total));
    }
    Ok(deltas)
}

/// `κ = ½ Σ|Δ_j|` over the given decomposition.
pub fn coupling_degree(deltas: &[i64]) -> Result<u32, TopologyError> {
    let total: i64 = deltas.iter().sum();
    if total != 0 {
        return Err(TopologyError::NotAnAKC(total));
    }
    // a zero sum makes Σ|Δ| even
    Ok((deltas.iter().map(|d| d.unsigned_abs()).sum::<u64>() / 2) as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopReport {
    pub name: String,
    pub sum_f: u32,
    pub actuated: u32,
    pub xi: u32,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub name: String,
    pub branches: Vec<(String, PocSet)>,
    pub platform: PocSet,
    pub total_f: u32,
    pub loops: Vec<LoopReport>,
    pub dof: i64,
    pub coupling_degree: u32,
}

pub fn analyze(topo: &MechanismTopology) -> Result<TopologyReport, TopologyError> {
    let xis = topo.xis()?;
    let dof = dof(topo)?;
    let deltas = constraint_degrees(topo)?;
    let coupling = coupling_degree(&deltas)?;
    let loops = topo
        .loops
        .iter()
        .zip(xis)
        .zip(&deltas)
        .map(|((l, xi), &delta)| LoopReport {
            name: l.name.clone(),
            sum_f: l.sum_f,
            actuated: l.actuated,
            xi,
            delta,
        })
        .collect();
    Ok(TopologyReport {
        name: topo.name.clone(),
        branches: topo.branches.clone(),
        platform: topo.platform_poc(),
        total_f: topo.total_f,
        loops,
        dof,
        coupling_degree: coupling,
    })
}

/// The studied mechanism: hybrid chain I (planar 2P4R loop then `R3 ∥ R4`)
/// and hybrid chain II (`P3` then two parallelograms).
pub const MECHANISM_TOPO: &str = r#"name = "2P4R planar loop + P3 and two parallelograms"

# planar 2P4R loop moves in the Y-Z plane, R12 along X
[[sets]]
name = "planar_2p4r"
t = ["y", "z"]
r = ["rx"]

# R3 parallel to R4, both along Y
[[sets]]
name = "r3_r4"
t = ["x", "z"]
r = ["ry"]

[[sets]]
name = "p3"
t = ["y"]

# parallelograms 1 and 2 in orthogonal planes
[[sets]]
name = "parallelograms"
t = ["x", "z"]

[[branches]]
name = "HSOC1"
elements = ["planar_2p4r", "r3_r4"]

[[branches]]
name = "HSOC2"
elements = ["p3", "parallelograms"]

[[loops]]
name = "LOOP1"
sum_f = 6
actuated = 2
xi_union = ["planar_2p4r"]

[[loops]]
name = "LOOP2"
sum_f = 5
actuated = 1
xi_union = ["planar_2p4r", "r3_r4", "HSOC2"]
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poc(t: &[&str], r: &[&str]) -> PocSet {
        PocSet::new(
            Span::from_labels(t.iter().copied()),
            Span::from_labels(r.iter().copied()),
        )
    }

    #[test]
    fn hybrid_chain_unions() {
        let h1 = poc_union(&poc(&["y", "z"], &["rx"]), &poc(&["x", "z"], &["ry"]));
        assert_eq!((h1.t.dim(), h1.r.dim()), (3, 2));
        let h2 = poc_union(&poc(&["y"], &[]), &poc(&["x", "z"], &[]));
        assert!(h2.is_pure_translation());
        assert!(poc_intersect(&h1, &h2).is_pure_translation());
    }

    #[test]
    fn partial_translation_intersection() {
        let a = poc(&["x", "y"], &["rz"]);
        let b = poc(&["x", "y", "z"], &[]);
        assert_eq!(poc_intersect(&a, &b), poc(&["x", "y"], &[]));
    }

    #[test]
    fn mechanism_values() {
        let topo = MechanismTopology::from_toml_str(MECHANISM_TOPO).unwrap();
        let r = analyze(&topo).unwrap();
        assert_eq!(r.dof, 3);
        assert_eq!(r.loops.iter().map(|l| l.xi).collect::<Vec<_>>(), [3, 5]);
        assert_eq!(r.loops.iter().map(|l| l.delta).collect::<Vec<_>>(), [1, -1]);
        assert_eq!(r.coupling_degree, 1);
        assert!(r.platform.is_pure_translation());
        assert_eq!(r.branches[0].1.to_string(), "t³ r²(rx,ry)");
        assert_eq!(r.platform.to_string(), "t³ r⁰");
    }

    #[test]
    fn scalar_formulas() {
        assert_eq!(coupling_degree(&[0, 0]), Ok(0));
        assert_eq!(coupling_degree(&[2, -1, -1]), Ok(2));
        assert_eq!(coupling_degree(&[1, 0]), Err(TopologyError::NotAnAKC(1)));
    }

    #[test]
    fn rejects_bad_files() {
        let bad = MECHANISM_TOPO.replace("sum_f = 5", "sum_f = 4");
        assert!(matches!(
            MechanismTopology::from_toml_str(&bad),
            Err(TopologyError::InvalidTopology(_))
        ));
        let unknown = MECHANISM_TOPO.replace("\"p3\", \"par", "\"p4\", \"par");
        assert!(matches!(
            MechanismTopology::from_toml_str(&unknown),
            Err(TopologyError::Parse(_))
        ));
        assert!(matches!(
            MechanismTopology::from_toml_str("name = 1"),
            Err(TopologyError::Parse(_))
        ));
    }

    #[test]
    fn rigid_loop_has_no_mobility() {
        let text = r#"
name = "rigid"
[[sets]]
name = "plane"
t = ["x", "y"]
r = ["rz"]
[[branches]]
name = "b"
elements = ["plane"]
[[loops]]
name = "L"
sum_f = 3
actuated = 0
xi = 3
"#;
        let topo = MechanismTopology::from_toml_str(text).unwrap();
        assert_eq!(dof(&topo), Ok(0));
    }

    fn span_strategy() -> impl Strategy<Value = Span> {
        prop::collection::btree_set(prop::sample::select(vec!["a", "b", "c", "d"]), 0..4)
            .prop_map(Span::from_labels)
    }

    fn poc_strategy() -> impl Strategy<Value = PocSet> {
        (span_strategy(), span_strategy()).prop_map(|(t, r)| PocSet::new(t, r))
    }

    proptest! {
        #[test]
        fn algebra_laws(a in poc_strategy(), b in poc_strategy(), c in poc_strategy()) {
            prop_assert_eq!(poc_union(&a, &b), poc_union(&b, &a));
            prop_assert_eq!(poc_intersect(&a, &b), poc_intersect(&b, &a));
            prop_assert_eq!(poc_union(&a, &a), a.clone());
            prop_assert_eq!(poc_intersect(&a, &a), a.clone());
            prop_assert_eq!(
                poc_union(&poc_union(&a, &b), &c),
                poc_union(&a, &poc_union(&b, &c))
            );
            prop_assert_eq!(
                poc_intersect(&poc_intersect(&a, &b), &c),
                poc_intersect(&a, &poc_intersect(&b, &c))
            );
            let u = poc_union(&a, &b);
            prop_assert!(u.dim() >= a.dim().max(b.dim()));
            prop_assert!(u.dim() <= 6);
        }
    }
}
