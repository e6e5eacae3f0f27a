//! Grid sweeps over actuator space and pose space, singularity loci on 2-D
//! slices, and CSV/JSON export.
//!
//! Nodes are evaluated in parallel and returned in grid order (`ix` slowest,
//! `iz` fastest). Margins are the normalized ones from [`crate::analysis`],
//! so different discriminants share one scale.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{serial_margins, singularity_margins};
use crate::fk::{direct_kinematics, FkError};
use crate::ik::inverse_kinematics;
use crate::model::{ActuatorInput, MechanismParams, PlatformPose};
use crate::numfmt::sig9;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("export failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("export failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Axis {
    Swept { min: f64, max: f64, count: usize },
    Fixed(f64),
}

impl Axis {
    pub fn len(&self) -> usize {
        match self {
            Axis::Swept { count, .. } => *count,
            Axis::Fixed(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        match *self {
            Axis::Swept { min, max, count } => min + (max - min) * i as f64 / (count - 1) as f64,
            Axis::Fixed(v) => v,
        }
    }

    pub fn is_swept(&self) -> bool {
        matches!(self, Axis::Swept { .. })
    }

    /// Parses `min:max:count` or a single fixed value.
    pub fn parse(text: &str) -> Result<Axis, WorkspaceError> {
        let bad = || WorkspaceError::InvalidGrid(format!("cannot parse axis `{text}`"));
        let parts: Vec<&str> = text.split(':').collect();
        match parts.as_slice() {
            [v] => Ok(Axis::Fixed(v.trim().parse().map_err(|_| bad())?)),
            [lo, hi, n] => Ok(Axis::Swept {
                min: lo.trim().parse().map_err(|_| bad())?,
                max: hi.trim().parse().map_err(|_| bad())?,
                count: n.trim().parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Three axes over `(q1, q2, q3)` or `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepGrid {
    pub axes: [Axis; 3],
}

impl SweepGrid {
    pub fn new(axes: [Axis; 3]) -> Result<Self, WorkspaceError> {
        for (k, a) in axes.iter().enumerate() {
            match *a {
                Axis::Swept { min, max, count } => {
                    if !(min.is_finite() && max.is_finite()) || min >= max {
                        return Err(WorkspaceError::InvalidGrid(format!(
                            "axis {k}: need min < max, got [{min}, {max}]"
                        )));
                    }
                    if count < 2 {
                        return Err(WorkspaceError::InvalidGrid(format!(
                            "axis {k}: need at least 2 nodes, got {count}"
                        )));
                    }
                }
                Axis::Fixed(v) if !v.is_finite() => {
                    return Err(WorkspaceError::InvalidGrid(format!("axis {k}: value {v}")))
                }
                Axis::Fixed(_) => {}
            }
        }
        Ok(Self { axes })
    }

    /// `count` nodes on each input axis over `±2a`.
    pub fn default_inputs(p: &MechanismParams, count: usize) -> Result<Self, WorkspaceError> {
        let r = 2.0 * p.a;
        let ax = Axis::Swept { min: -r, max: r, count };
        Self::new([ax; 3])
    }

    /// `count` nodes over the reach box `|x + b - d| <= l4`, `|y| <= a`,
    /// `z` in `[l1 - l2 - l4, l1 + l2 + l4]`.
    pub fn default_poses(p: &MechanismParams, count: usize) -> Result<Self, WorkspaceError> {
        let xc = p.d - p.b;
        Self::new([
            Axis::Swept { min: xc - p.l4, max: xc + p.l4, count },
            Axis::Swept { min: -p.a, max: p.a, count },
            Axis::Swept {
                min: p.l1 - p.l2 - p.l4,
                max: p.l1 + p.l2 + p.l4,
                count,
            },
        ])
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, flat: usize) -> [usize; 3] {
        let ny = self.axes[1].len();
        let nz = self.axes[2].len();
        [flat / (ny * nz), (flat / nz) % ny, flat % nz]
    }

    pub fn point(&self, idx: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|k| self.axes[k].value(idx[k]))
    }

    pub fn swept_axes(&self) -> Vec<usize> {
        (0..3).filter(|&k| self.axes[k].is_swept()).collect()
    }
}

/// One grid node. For input sweeps `q` is the node and the pose fields hold
/// the first direct solution; for pose sweeps it is the other way round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub ix: usize,
    pub iy: usize,
    pub iz: usize,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub q3: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub count: usize,
    pub branch: Option<String>,
    pub min_margin: Option<f64>,
    pub margin_name: Option<String>,
    /// Why the count is zero, when it is.
    pub reason: Option<String>,
    /// Every solution as `(branch, [q or pose])`.
    pub solutions: Vec<(String, [f64; 3])>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepKind {
    Inputs,
    Poses,
}

fn blank(idx: [usize; 3]) -> SweepRecord {
    SweepRecord {
        ix: idx[0],
        iy: idx[1],
        iz: idx[2],
        q1: None,
        q2: None,
        q3: None,
        x: None,
        y: None,
        z: None,
        count: 0,
        branch: None,
        min_margin: None,
        margin_name: None,
        reason: None,
        solutions: Vec::new(),
    }
}

fn min_named(margins: impl IntoIterator<Item = (String, f64)>) -> Option<(String, f64)> {
    margins.into_iter().min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Normalized margins of one node, by name.
pub fn node_margins(kind: SweepKind, v: [f64; 3], p: &MechanismParams) -> Vec<(String, f64)> {
    match kind {
        SweepKind::Inputs => singularity_margins(&ActuatorInput::from_array(v), p)
            .map(|m| m.named().into_iter().map(|(n, m)| (n, m.normalized)).collect())
            .unwrap_or_default(),
        SweepKind::Poses => serial_margins(&PlatformPose::new(v[0], v[1], v[2]), p),
    }
}

fn input_record(idx: [usize; 3], q: [f64; 3], p: &MechanismParams) -> SweepRecord {
    let input = ActuatorInput::from_array(q);
    let mut r = blank(idx);
    [r.q1, r.q2, r.q3] = q.map(Some);
    if let Some((name, m)) = min_named(node_margins(SweepKind::Inputs, q, p)) {
        r.margin_name = Some(name);
        r.min_margin = Some(m);
    }
    match direct_kinematics(&input, p) {
        Ok(sols) if !sols.is_empty() => {
            let first = sols[0];
            r.x = Some(first.pose.x);
            r.y = Some(first.pose.y);
            r.z = Some(first.pose.z);
            r.branch = Some(first.branch.to_string());
            r.count = sols.len();
            r.solutions = sols
                .iter()
                .map(|s| (s.branch.to_string(), [s.pose.x, s.pose.y, s.pose.z]))
                .collect();
        }
        Ok(_) => r.reason = Some(FkError::NoRealSolution.to_string()),
        Err(e) => r.reason = Some(e.to_string()),
    }
    r
}

fn pose_record(idx: [usize; 3], v: [f64; 3], p: &MechanismParams) -> SweepRecord {
    let pose = PlatformPose::new(v[0], v[1], v[2]);
    let mut r = blank(idx);
    [r.x, r.y, r.z] = v.map(Some);
    if let Some((name, m)) = min_named(node_margins(SweepKind::Poses, v, p)) {
        r.margin_name = Some(name);
        r.min_margin = Some(m);
    }
    match inverse_kinematics(&pose, p) {
        Ok(sols) => {
            let first = sols[0];
            [r.q1, r.q2, r.q3] = first.input.to_array().map(Some);
            r.branch = Some(first.branch.to_string());
            r.count = sols.len();
            r.solutions = sols
                .iter()
                .map(|s| (s.branch.to_string(), s.input.to_array()))
                .collect();
        }
        Err(e) => r.reason = Some(e.to_string()),
    }
    r
}

fn sweep(kind: SweepKind, p: &MechanismParams, grid: &SweepGrid) -> Vec<SweepRecord> {
    (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let idx = grid.index(flat);
            let v = grid.point(idx);
            match kind {
                SweepKind::Inputs => input_record(idx, v, p),
                SweepKind::Poses => pose_record(idx, v, p),
            }
        })
        .collect()
}

/// Direct kinematics and discriminant margins at every node.
pub fn sweep_inputs(p: &MechanismParams, grid: &SweepGrid) -> Vec<SweepRecord> {
    sweep(SweepKind::Inputs, p, grid)
}

/// Inverse kinematics and feasibility margins at every node.
pub fn sweep_poses(p: &MechanismParams, grid: &SweepGrid) -> Vec<SweepRecord> {
    sweep(SweepKind::Poses, p, grid)
}

/// A sign change of one named margin, interpolated on a cell edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocusPoint {
    pub point: [f64; 3],
    pub margin_name: String,
}

/// Marches the edges of a 2-D slice and emits a point wherever a named
/// margin changes sign between adjacent nodes. Linear interpolation only,
/// so accuracy is limited by the cell size.
pub fn singularity_locus(
    kind: SweepKind,
    p: &MechanismParams,
    slice: &SweepGrid,
) -> Result<Vec<LocusPoint>, WorkspaceError> {
    let swept = slice.swept_axes();
    if swept.len() != 2 {
        return Err(WorkspaceError::InvalidGrid(format!(
            "a locus slice sweeps exactly two axes, got {}",
            swept.len()
        )));
    }
    let margins: Vec<Vec<(String, f64)>> = (0..slice.len())
        .into_par_iter()
        .map(|flat| node_margins(kind, slice.point(slice.index(flat)), p))
        .collect();
    let flat_of = |idx: [usize; 3]| {
        let ny = slice.axes[1].len();
        let nz = slice.axes[2].len();
        (idx[0] * ny + idx[1]) * nz + idx[2]
    };

    let mut out = Vec::new();
    for flat in 0..slice.len() {
        let idx = slice.index(flat);
        for &k in &swept {
            if idx[k] + 1 >= slice.axes[k].len() {
                continue;
            }
            let mut next = idx;
            next[k] += 1;
            let (pa, pb) = (slice.point(idx), slice.point(next));
            let mb = &margins[flat_of(next)];
            for (name, va) in &margins[flat] {
                let Some((_, vb)) = mb.iter().find(|(n, _)| n == name) else {
                    continue;
                };
                let (va, vb) = (*va, *vb);
                // a zero at the far end is owned by the next edge
                if !(va == 0.0 || va * vb < 0.0) {
                    continue;
                }
                let s = va / (va - vb);
                out.push(LocusPoint {
                    point: std::array::from_fn(|c| pa[c] + s * (pb[c] - pa[c])),
                    margin_name: name.clone(),
                });
            }
        }
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 13] = [
    "ix", "iy", "iz", "q1", "q2", "q3", "x", "y", "z", "count", "branch", "min_margin",
    "margin_name",
];

fn opt(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[SweepRecord], w: W) -> Result<(), WorkspaceError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record([
            r.ix.to_string(),
            r.iy.to_string(),
            r.iz.to_string(),
            opt(r.q1),
            opt(r.q2),
            opt(r.q3),
            opt(r.x),
            opt(r.y),
            opt(r.z),
            r.count.to_string(),
            r.branch.clone().unwrap_or_default(),
            opt(r.min_margin),
            r.margin_name.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[SweepRecord], w: W) -> Result<(), WorkspaceError> {
    serde_json::to_writer_pretty(w, records)?;
    Ok(())
}

pub fn write_locus_csv<W: Write>(points: &[LocusPoint], w: W) -> Result<(), WorkspaceError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["a1", "a2", "a3", "margin_name"])?;
    for l in points {
        let [a, b, c] = l.point.map(sig9);
        out.write_record([a, b, c, l.margin_name.clone()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sign::Sign;

    fn p() -> MechanismParams {
        MechanismParams::reference()
    }

    fn swept(min: f64, max: f64, count: usize) -> Axis {
        Axis::Swept { min, max, count }
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::new([swept(1.0, 1.0, 3), Axis::Fixed(0.0), Axis::Fixed(0.0)]).is_err());
        assert!(SweepGrid::new([swept(0.0, 1.0, 1), Axis::Fixed(0.0), Axis::Fixed(0.0)]).is_err());
        assert!(matches!(Axis::parse("1:2"), Err(WorkspaceError::InvalidGrid(_))));
        assert_eq!(Axis::parse("-3:3:7").unwrap(), swept(-3.0, 3.0, 7));
        assert_eq!(Axis::parse("4").unwrap(), Axis::Fixed(4.0));
    }

    #[test]
    fn grid_order_is_row_major() {
        let g = SweepGrid::new([swept(0.0, 1.0, 2), swept(0.0, 1.0, 3), swept(0.0, 1.0, 4)]).unwrap();
        let recs = sweep_inputs(&p(), &g);
        assert_eq!(recs.len(), 24);
        for (flat, r) in recs.iter().enumerate() {
            assert_eq!([r.ix, r.iy, r.iz], g.index(flat));
        }
    }

    #[test]
    fn reference_node() {
        let g = SweepGrid::new([Axis::Fixed(350.0), Axis::Fixed(-300.0), Axis::Fixed(-25.0)]).unwrap();
        let r = &sweep_inputs(&p(), &g)[0];
        assert_eq!(r.count, 8);
        assert!(r.min_margin.unwrap() > 0.0);
        assert!((r.y.unwrap() - 25.0).abs() < 1e-9);
    }

    #[test]
    fn unassemblable_and_unreachable_nodes() {
        let g = SweepGrid::new([Axis::Fixed(900.0), Axis::Fixed(-900.0), Axis::Fixed(0.0)]).unwrap();
        let r = &sweep_inputs(&p(), &g)[0];
        assert_eq!(r.count, 0);
        assert!(r.reason.is_some());
        assert!(r.min_margin.unwrap() < 0.0);

        let xc = p().d - p().b;
        let g = SweepGrid::new([Axis::Fixed(xc + p().l4 + 1.0), Axis::Fixed(0.0), Axis::Fixed(30.0)]).unwrap();
        assert_eq!(sweep_poses(&p(), &g)[0].count, 0);
    }

    #[test]
    fn fk_pose_is_reachable() {
        let q = ActuatorInput::new(350.0, -300.0, -25.0);
        for s in direct_kinematics(&q, &p()).unwrap() {
            let g = SweepGrid::new([
                Axis::Fixed(s.pose.x),
                Axis::Fixed(s.pose.y),
                Axis::Fixed(s.pose.z),
            ])
            .unwrap();
            let r = &sweep_poses(&p(), &g)[0];
            assert!(r.count >= 1);
            assert!(r.solutions.iter().any(|(_, v)| ActuatorInput::from_array(*v).distance(&q) < 1e-6));
        }
    }

    /// Along a 1-D input path the count only changes between nodes where
    /// some margin changes sign or appears, and always by an even number.
    #[test]
    fn count_changes_only_at_margin_zeros() {
        let p = p();
        let g = SweepGrid::new([Axis::Fixed(350.0), Axis::Fixed(-300.0), swept(-400.0, 400.0, 801)]).unwrap();
        let recs = sweep_inputs(&p, &g);
        let mut changes = 0;
        for w in recs.windows(2) {
            if w[0].count == w[1].count {
                continue;
            }
            changes += 1;
            assert_eq!((w[0].count as i64 - w[1].count as i64) % 2, 0);
            let ma = node_margins(SweepKind::Inputs, [350.0, -300.0, w[0].q3.unwrap()], &p);
            let mb = node_margins(SweepKind::Inputs, [350.0, -300.0, w[1].q3.unwrap()], &p);
            // a node can land on a fold, where the margin is zero to rounding
            let sign = |v: f64| if v.abs() < 1e-9 { 0.0 } else { v.signum() };
            let crossed = ma.iter().any(|(n, a)| match mb.iter().find(|(m, _)| m == n) {
                Some((_, b)) => sign(*a) != sign(*b),
                None => true,
            }) || mb.len() != ma.len();
            assert!(crossed, "count changed without a margin zero near q3 = {:?}", w[1].q3);
        }
        assert!(changes > 0);
    }

    #[test]
    fn gamma_fold_locus() {
        let p = p();
        // y_A1 - y_A2 - l3 = ±2 l2 crosses the square
        let g = SweepGrid::new([swept(-600.0, 600.0, 61), swept(-600.0, 600.0, 61), Axis::Fixed(0.0)]).unwrap();
        let locus = singularity_locus(SweepKind::Inputs, &p, &g).unwrap();
        let gamma: Vec<_> = locus.iter().filter(|l| l.margin_name == "D_gamma").collect();
        assert!(!gamma.is_empty());
        let h = 20.0;
        for l in &gamma {
            let u = l.point[0] - l.point[1] - p.l3;
            assert!((u.abs() - 2.0 * p.l2).abs() < h, "{l:?}");
            let m = node_margins(SweepKind::Inputs, l.point, &p)[0].1;
            // linear interpolation error of a quadratic over one cell
            assert!(m.abs() < (2.0 * h / p.l2) * (2.0 * h / p.l2), "{m}");
        }
    }

    #[test]
    fn regular_slice_has_empty_locus() {
        let p = p();
        let g = SweepGrid::new([swept(349.0, 351.0, 5), swept(-301.0, -299.0, 5), Axis::Fixed(-25.0)]).unwrap();
        assert!(singularity_locus(SweepKind::Inputs, &p, &g).unwrap().is_empty());
        let bad = SweepGrid::new([swept(0.0, 1.0, 3), Axis::Fixed(0.0), Axis::Fixed(0.0)]).unwrap();
        assert!(singularity_locus(SweepKind::Inputs, &p, &bad).is_err());
    }

    #[test]
    fn serial_margin_crosses_zero_continuously() {
        let p = p();
        // second leg of a fixed (alpha, beta) pair: M2 passes through zero as z grows
        let g = SweepGrid::new([Axis::Fixed(-50.0), Axis::Fixed(0.0), swept(400.0, 560.0, 201)]).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| {
                node_margins(SweepKind::Poses, g.point(g.index(i)), &p)
                    .into_iter()
                    .find(|(n, _)| n == &format!("M2[{}{}]", Sign::Plus, Sign::Plus))
                    .unwrap()
                    .1
            })
            .collect();
        assert!(vals.first().unwrap().signum() != vals.last().unwrap().signum());
        for w in vals.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.05);
        }
    }

    #[test]
    fn csv_layout() {
        let g = SweepGrid::new([Axis::Fixed(350.0), Axis::Fixed(-300.0), swept(-25.0, 75.0, 3)]).unwrap();
        let recs = sweep_inputs(&p(), &g);
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), 3);
        let mut buf = Vec::new();
        write_json(&recs, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 3);
        assert!(v[0]["margin_name"].is_string());
    }
}
