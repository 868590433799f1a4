//! Pareto ranking over (psnr, params, flops) and feasibility-first ranking
//! under parameter / FLOPs caps.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Maximized.
    pub psnr: f64,
    /// Minimized.
    pub params: u64,
    /// Minimized.
    pub flops: u64,
}

impl ObjectiveVector {
    pub fn new(psnr: f64, params: u64, flops: u64) -> Self {
        ObjectiveVector { psnr, params, flops }
    }
}

/// `a` is no worse than `b` in every objective and strictly better in one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let no_worse = a.psnr >= b.psnr && a.params <= b.params && a.flops <= b.flops;
    let better = a.psnr > b.psnr || a.params < b.params || a.flops < b.flops;
    no_worse && better
}

/// Fast non-dominated sort. Returns fronts of indices into `vs`, best front
/// first, each front in ascending index order.
pub fn non_dominated_sort(vs: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = vs.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&vs[i], &vs[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&vs[j], &vs[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Front index of every element of `vs`.
pub fn front_ranks(vs: &[ObjectiveVector]) -> Vec<usize> {
    let mut ranks = vec![0; vs.len()];
    for (r, front) in non_dominated_sort(vs).iter().enumerate() {
        for &i in front {
            ranks[i] = r;
        }
    }
    ranks
}

/// Crowding distance of every member of one front. Boundary points of each
/// objective are infinite; objectives with zero range contribute nothing.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    let axes: [fn(&ObjectiveVector) -> f64; 3] =
        [|v| v.psnr, |v| v.params as f64, |v| v.flops as f64];
    for axis in axes {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| axis(&front[a]).total_cmp(&axis(&front[b])).then(a.cmp(&b)));
        let lo = axis(&front[order[0]]);
        let hi = axis(&front[order[n - 1]]);
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n.saturating_sub(1) {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (axis(&front[order[w + 1]]) - axis(&front[order[w - 1]])) / range;
            }
        }
    }
    dist
}

/// Crowding distance of every element of `vs`, computed within its own front.
pub fn crowding_by_front(vs: &[ObjectiveVector], fronts: &[Vec<usize>]) -> Vec<f64> {
    let mut out = vec![0.0; vs.len()];
    for front in fronts {
        let members: Vec<ObjectiveVector> = front.iter().map(|&i| vs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members)) {
            out[i] = d;
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
#[error("constraint caps must be positive (params {w_net}, flops {v_net})")]
pub struct ConstraintError {
    w_net: u64,
    v_net: u64,
}

/// Upper bounds on network parameters and FLOPs. Both are strict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub w_net: u64,
    pub v_net: u64,
}

impl ConstraintSpec {
    pub fn new(w_net: u64, v_net: u64) -> Result<Self, ConstraintError> {
        if w_net == 0 || v_net == 0 {
            return Err(ConstraintError { w_net, v_net });
        }
        Ok(ConstraintSpec { w_net, v_net })
    }

    pub fn is_feasible(&self, v: &ObjectiveVector) -> bool {
        v.params < self.w_net && v.flops < self.v_net
    }

    /// Relative excess over the caps; zero for feasible points. A point sitting
    /// exactly on a cap has zero excess but is still infeasible.
    pub fn violation(&self, v: &ObjectiveVector) -> f64 {
        let excess = |x: u64, cap: u64| x.saturating_sub(cap) as f64 / cap as f64;
        excess(v.params, self.w_net) + excess(v.flops, self.v_net)
    }
}

/// Total order used by constrained selection: feasible before infeasible,
/// feasible by psnr descending, infeasible by ascending violation. Ties fall
/// back to fewer params, fewer flops, then `tiebreak`.
pub fn constrained_cmp(
    a: &ObjectiveVector,
    b: &ObjectiveVector,
    cs: Option<&ConstraintSpec>,
) -> Ordering {
    let feasible = |v| cs.is_none_or(|c| c.is_feasible(v));
    let primary = match (feasible(a), feasible(b)) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => b.psnr.total_cmp(&a.psnr),
        (false, false) => {
            let c = cs.expect("infeasible points imply constraints");
            c.violation(a).total_cmp(&c.violation(b)).then(b.psnr.total_cmp(&a.psnr))
        }
    };
    primary.then(a.params.cmp(&b.params)).then(a.flops.cmp(&b.flops))
}

/// Indices of `vs`, best first, under [`constrained_cmp`] with `labels` (for
/// example genome encodings) as the final tie-break.
pub fn constrained_rank<L: Ord>(
    vs: &[ObjectiveVector],
    labels: &[L],
    cs: Option<&ConstraintSpec>,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vs.len()).collect();
    order.sort_by(|&a, &b| {
        constrained_cmp(&vs[a], &vs[b], cs).then_with(|| labels[a].cmp(&labels[b])).then(a.cmp(&b))
    });
    order
}

/// Indices of `vs`, best first, by front then crowding distance (larger
/// first), then psnr, then `labels`.
pub fn pareto_rank<L: Ord>(vs: &[ObjectiveVector], labels: &[L]) -> Vec<usize> {
    let fronts = non_dominated_sort(vs);
    let crowd = crowding_by_front(vs, &fronts);
    let rank = {
        let mut r = vec![0; vs.len()];
        for (k, f) in fronts.iter().enumerate() {
            for &i in f {
                r[i] = k;
            }
        }
        r
    };
    let mut order: Vec<usize> = (0..vs.len()).collect();
    order.sort_by(|&a, &b| {
        rank[a]
            .cmp(&rank[b])
            .then(crowd[b].total_cmp(&crowd[a]))
            .then(vs[b].psnr.total_cmp(&vs[a].psnr))
            .then_with(|| labels[a].cmp(&labels[b]))
            .then(a.cmp(&b))
    });
    order
}

pub const PARETO_CSV_HEADER: [&str; 7] =
    ["genome", "psnr", "params", "flops", "multi_adds", "front", "crowding"];

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoRow {
    pub genome: String,
    pub objectives: ObjectiveVector,
}

/// Writes archive rows as CSV, sorted by front then psnr descending.
pub fn write_pareto_csv<W: Write>(rows: &[ParetoRow], out: W) -> csv::Result<()> {
    let vs: Vec<ObjectiveVector> = rows.iter().map(|r| r.objectives).collect();
    let fronts = non_dominated_sort(&vs);
    let crowd = crowding_by_front(&vs, &fronts);
    let ranks = front_ranks(&vs);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        ranks[a]
            .cmp(&ranks[b])
            .then(vs[b].psnr.total_cmp(&vs[a].psnr))
            .then_with(|| rows[a].genome.cmp(&rows[b].genome))
    });
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PARETO_CSV_HEADER)?;
    for i in order {
        let v = &vs[i];
        w.write_record([
            rows[i].genome.clone(),
            v.psnr.to_string(),
            v.params.to_string(),
            v.flops.to_string(),
            (v.flops / 2).to_string(),
            ranks[i].to_string(),
            if crowd[i].is_infinite() { "inf".to_string() } else { crowd[i].to_string() },
        ])?;
    }
    w.flush()?;
    Ok(())
}
