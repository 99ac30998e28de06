use std::io::Write;

use super::ParamSpace;
use crate::error::{invalid, Result};

/// Finite `δ`-cover of a box by an axis-aligned lattice, in row-major order
/// (last coordinate varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaNet {
    delta: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Intervals per axis; 0 means the axis holds only its midpoint.
    intervals: Vec<usize>,
    points: Vec<Vec<f64>>,
    constant: f64,
}

impl DeltaNet {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// `c` with `J <= c δ^{-d}` for every `δ` below the box diameter.
    pub fn cardinality_constant(&self) -> f64 {
        self.constant
    }

    /// Lattice spacing along each axis (0 on collapsed axes).
    pub fn spacing(&self) -> Vec<f64> {
        self.intervals
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&m, (l, u))| if m == 0 { 0.0 } else { (u - l) / m as f64 })
            .collect()
    }

    fn coordinate(&self, axis: usize, k: usize) -> f64 {
        let (lo, hi, m) = (self.lower[axis], self.upper[axis], self.intervals[axis]);
        if m == 0 {
            0.5 * (lo + hi)
        } else if k == m {
            hi
        } else {
            lo + k as f64 * (hi - lo) / m as f64
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|k| format!("theta_{k}")).collect();
        writeln!(w, "index,{}", header.join(","))?;
        for (j, p) in self.points.iter().enumerate() {
            let row: Vec<String> = p.iter().map(f64::to_string).collect();
            writeln!(w, "{},{}", j + 1, row.join(","))?;
        }
        Ok(())
    }
}

/// Lattice with `ceil(d w_k / δ)` intervals per axis, endpoints included.
/// The spacing `δ/d` keeps the Euclidean covering radius at `δ/(2√d)`. When
/// `δ` is at least half the diameter, the centre alone covers the box.
pub fn build_delta_net(space: &ParamSpace, delta: f64) -> Result<DeltaNet> {
    if !(delta > 0.0 && delta.is_finite()) {
        return invalid(format!("delta must be positive and finite, got {delta}"));
    }
    let d = space.dim();
    let widths = space.widths();
    let diameter = space.diameter();
    let constant = widths.iter().map(|w| d as f64 * w + diameter).product::<f64>();
    let intervals: Vec<usize> = if delta >= 0.5 * diameter {
        vec![0; d]
    } else {
        widths.iter().map(|w| (d as f64 * w / delta).ceil() as usize).collect()
    };
    let mut net = DeltaNet {
        delta,
        lower: space.lower().to_vec(),
        upper: space.upper().to_vec(),
        intervals,
        points: Vec::new(),
        constant,
    };
    let counts: Vec<usize> = net.intervals.iter().map(|m| m + 1).collect();
    let total: usize = counts.iter().product();
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        net.points.push((0..d).map(|a| net.coordinate(a, idx[a])).collect());
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < counts[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(net)
}

/// Index and distance of the closest net point; ties go to the lowest index.
pub fn nearest_net_point(net: &DeltaNet, theta: &[f64]) -> Result<(usize, f64)> {
    if theta.len() != net.dim() {
        return invalid(format!("expected a {}-dimensional point", net.dim()));
    }
    let mut index = 0usize;
    let mut dist2 = 0.0;
    for a in 0..net.dim() {
        let (lo, hi, m) = (net.lower[a], net.upper[a], net.intervals[a]);
        let t = theta[a];
        if !(lo <= t && t <= hi) {
            return invalid(format!("coordinate {} = {t} outside [{lo}, {hi}]", a + 1));
        }
        let k = if m == 0 {
            0
        } else {
            let s = (t - lo) / (hi - lo) * m as f64;
            let mut k = (s.floor() as usize).min(m);
            // compare the two candidates exactly; ties keep the lower one
            if k < m && (net.coordinate(a, k + 1) - t).abs() < (t - net.coordinate(a, k)).abs() {
                k += 1;
            }
            k
        };
        let diff = t - net.coordinate(a, k);
        dist2 += diff * diff;
        index = index * (m + 1) + k;
    }
    Ok((index, dist2.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quarter_net() {
        let net = build_delta_net(&ParamSpace::interval(0.0, 1.0).unwrap(), 0.25).unwrap();
        let pts: Vec<f64> = net.points().iter().map(|p| p[0]).collect();
        assert_eq!(pts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let (j, d) = nearest_net_point(&net, &[0.3]).unwrap();
        assert_eq!(j, 1);
        assert!((d - 0.05).abs() < 1e-15);
        assert_eq!(nearest_net_point(&net, &[0.75]).unwrap(), (3, 0.0));
        // midpoint tie goes to the lower index
        assert_eq!(nearest_net_point(&net, &[0.125]).unwrap().0, 0);
    }

    #[test]
    fn large_delta_gives_centre() {
        let space = ParamSpace::new(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let net = build_delta_net(&space, 0.75).unwrap();
        assert_eq!(net.points(), &[vec![0.5, 0.5]]);
        assert!(nearest_net_point(&net, &[1.0, 1.0]).unwrap().1 <= 0.75);
    }

    #[test]
    fn errors() {
        let space = ParamSpace::interval(0.0, 1.0).unwrap();
        assert!(build_delta_net(&space, 0.0).is_err());
        assert!(build_delta_net(&space, -1.0).is_err());
        let net = build_delta_net(&space, 0.1).unwrap();
        assert!(nearest_net_point(&net, &[1.5]).is_err());
        assert!(nearest_net_point(&net, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn square_corners_covered() {
        let space = ParamSpace::new(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let net = build_delta_net(&space, 0.2).unwrap();
        for c in [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] {
            assert!(nearest_net_point(&net, &c).unwrap().1 <= 0.2);
        }
        assert!(net.spacing().iter().all(|s| *s <= 2.0 * 0.2 / 2f64.sqrt()));
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let net = build_delta_net(&ParamSpace::interval(-1.0, 1.0).unwrap(), 0.5).unwrap();
        let mut buf = Vec::new();
        net.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), net.len() + 1);
    }
}
