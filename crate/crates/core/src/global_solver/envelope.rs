//! Per-coordinate penalty contributions implied by a node.
//!
//! For a penalized coordinate b = β_i the coordinate-local part of the KKT system
//! (the g/h stationarity rows and the four complementarity pairs) admits only three
//! configurations:
//!
//! * SCAD: inner (g = λ, |b| ≤ λ), middle (λ ≤ |b| ≤ aλ, g = g*), outer (g = 0, h ≥ aλ);
//! * MCP: inner (g = |b| ≤ aλ, including b = 0) and outer (g = aλ, h ≥ aλ).
//!
//! Inner and middle are worth n·P(|b|), outer is worth n·P_max. Pair states rule some of
//! them out or restrict their range. The result is a union of pieces, each concave on
//! an interval that does not cross zero, so the convex envelope over the node box is the
//! lower convex hull of the piece endpoints.

use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::reformulate::PairState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PieceValue {
    /// n·P(|b|)
    Penalty,
    Const(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub value: PieceValue,
}

/// Pair states of one penalized coordinate, in the order (h−β, h+β, g, ḡ−g).
pub type CoordPattern = [PairState; 4];

pub const FREE4: CoordPattern = [PairState::Free; 4];

#[derive(Clone, Debug)]
pub struct CoordModel {
    pub pieces: Vec<Piece>,
    /// Lower convex hull (breakpoint, value), strictly increasing breakpoints.
    pub hull: Vec<(f64, f64)>,
    n: f64,
    spec: Option<PenaltySpec>,
}

fn piece_value(v: PieceValue, b: f64, n: f64, spec: &Option<PenaltySpec>) -> f64 {
    match v {
        PieceValue::Penalty => spec.as_ref().map_or(0.0, |s| n * s.value(b.abs())),
        PieceValue::Const(c) => c,
    }
}

/// Intersects [lo,hi] with each sign side and pushes the nonempty parts.
fn push_split(out: &mut Vec<Piece>, lo: f64, hi: f64, value: PieceValue) {
    if lo > hi {
        return;
    }
    if lo < 0.0 && hi > 0.0 {
        out.push(Piece { lo, hi: 0.0, value });
        out.push(Piece { lo: 0.0, hi, value });
    } else {
        out.push(Piece { lo, hi, value });
    }
}

fn clip(out: &mut Vec<Piece>, lo: f64, hi: f64, blo: f64, bhi: f64, value: PieceValue) {
    push_split(out, lo.max(blo), hi.min(bhi), value);
}

/// Pieces for a penalized coordinate under `pat` restricted to [blo, bhi].
pub fn pieces(spec: &PenaltySpec, n: f64, pat: &CoordPattern, blo: f64, bhi: f64) -> Vec<Piece> {
    use PairState::*;
    let [p1, p2, p3, p4] = *pat;
    let l = spec.lambda;
    let al = spec.a * l;
    let pmax = n * spec.max_value();
    // sides available to configurations with g > 0 and h = |b|
    let pos_ok = p1 != LeftZero && p2 != RightZero;
    let neg_ok = p2 != LeftZero && p1 != RightZero;
    let zero_ok = !(p1 == LeftZero && p2 == LeftZero);
    let mut out = vec![];
    let sided = |out: &mut Vec<Piece>, tmin: f64, tmax: f64| {
        if pos_ok {
            clip(out, tmin, tmax, blo, bhi, PieceValue::Penalty);
        }
        if neg_ok {
            clip(out, -tmax, -tmin, blo, bhi, PieceValue::Penalty);
        }
        if tmin == 0.0 && !pos_ok && !neg_ok && zero_ok && blo <= 0.0 && bhi >= 0.0 {
            out.push(Piece { lo: 0.0, hi: 0.0, value: PieceValue::Penalty });
        }
    };
    // outer range for b under the sign pairs and the θ ≤ aλ cut
    let outer = |p_cut: bool| -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        if p1 == RightZero {
            lo = lo.max(al);
        }
        if p2 == RightZero {
            hi = hi.min(-al);
        }
        if p_cut {
            lo = lo.max(-al);
            hi = hi.min(al);
        }
        (lo <= hi).then_some((lo, hi))
    };
    match spec.family {
        PenaltyFamily::Scad => {
            if p3 != RightZero && p4 != LeftZero {
                sided(&mut out, 0.0, l);
            }
            if p3 != RightZero && p4 != RightZero {
                sided(&mut out, l, al);
            }
            if p4 != RightZero {
                if let Some((lo, hi)) = outer(p3 == LeftZero) {
                    clip(&mut out, lo, hi, blo, bhi, PieceValue::Const(pmax));
                }
            }
        }
        PenaltyFamily::Mcp => {
            if p4 != RightZero {
                if p3 != RightZero {
                    sided(&mut out, 0.0, al);
                } else if zero_ok && blo <= 0.0 && bhi >= 0.0 {
                    out.push(Piece { lo: 0.0, hi: 0.0, value: PieceValue::Penalty });
                }
            }
            if p3 != RightZero {
                if let Some((lo, hi)) = outer(p4 == LeftZero) {
                    clip(&mut out, lo, hi, blo, bhi, PieceValue::Const(pmax));
                }
            }
        }
    }
    out
}

impl CoordModel {
    pub fn penalized(spec: &PenaltySpec, n: f64, pat: &CoordPattern, blo: f64, bhi: f64) -> Self {
        let pieces = pieces(spec, n, pat, blo, bhi);
        Self::from_pieces(pieces, n, Some(*spec))
    }

    pub fn unpenalized(blo: f64, bhi: f64) -> Self {
        let pieces = if blo <= bhi { vec![Piece { lo: blo, hi: bhi, value: PieceValue::Const(0.0) }] } else { vec![] };
        Self::from_pieces(pieces, 1.0, None)
    }

    fn from_pieces(pieces: Vec<Piece>, n: f64, spec: Option<PenaltySpec>) -> Self {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(2 * pieces.len());
        for pc in &pieces {
            pts.push((pc.lo, piece_value(pc.value, pc.lo, n, &spec)));
            if pc.hi != pc.lo {
                pts.push((pc.hi, piece_value(pc.value, pc.hi, n, &spec)));
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup_by(|b, a| a.0 == b.0);
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            while hull.len() >= 2 {
                let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // remove a if it lies on or above the segment o→p
                let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        CoordModel { pieces, hull, n, spec }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.hull.first().map_or(f64::INFINITY, |p| p.0)
    }

    pub fn hi(&self) -> f64 {
        self.hull.last().map_or(f64::NEG_INFINITY, |p| p.0)
    }

    /// Exact node contribution at b, +∞ outside every piece.
    pub fn psi(&self, b: f64) -> f64 {
        let mut best = f64::INFINITY;
        for pc in &self.pieces {
            if b >= pc.lo && b <= pc.hi {
                best = best.min(piece_value(pc.value, b, self.n, &self.spec));
            }
        }
        best
    }

    /// Distance from b to the nearest piece.
    pub fn gap_distance(&self, b: f64) -> f64 {
        self.pieces.iter().map(|pc| (pc.lo - b).max(b - pc.hi).max(0.0)).fold(f64::INFINITY, f64::min)
    }

    /// Convex envelope value at b ∈ [lo, hi].
    pub fn env(&self, b: f64) -> f64 {
        let h = &self.hull;
        if h.len() == 1 {
            return h[0].1;
        }
        let k = h.partition_point(|p| p.0 < b).clamp(1, h.len() - 1);
        let (a, c) = (h[k - 1], h[k]);
        let t = (b - a.0) / (c.0 - a.0);
        a.1 + t * (c.1 - a.1)
    }

    /// Slopes of the hull segments.
    pub fn slopes(&self) -> Vec<f64> {
        self.hull.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
    }

    /// argmin over [lo,hi] of ½·qii·t² − c·t + env(t).
    pub fn prox(&self, qii: f64, c: f64) -> f64 {
        let h = &self.hull;
        if h.len() == 1 {
            return h[0].0;
        }
        let slopes = self.slopes();
        // derivative of the smooth part at t: qii·t − c
        let dphi = |t: f64| qii * t - c;
        if dphi(h[0].0) + slopes[0] >= 0.0 {
            return h[0].0;
        }
        for (j, s) in slopes.iter().enumerate() {
            let (t0, t1) = (h[j].0, h[j + 1].0);
            // interior of segment j
            if dphi(t1) + s > 0.0 {
                if qii > 0.0 {
                    let t = (c - s) / qii;
                    return t.clamp(t0, t1);
                }
                return t0;
            }
            // breakpoint t1 between segment j and j+1
            if j + 1 < slopes.len() && dphi(t1) + slopes[j + 1] >= 0.0 {
                return t1;
            }
        }
        h[h.len() - 1].0
    }

    /// min over [lo,hi] of g·s + env(s); the minimum sits at a breakpoint.
    pub fn min_linear(&self, g: f64) -> f64 {
        self.hull.iter().map(|&(t, v)| g * t + v).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PairState::*;

    fn scad() -> PenaltySpec {
        PenaltySpec::scad(1.0, 3.7).unwrap()
    }

    #[test]
    fn free_pattern_reproduces_penalty() {
        let s = scad();
        let cm = CoordModel::penalized(&s, 2.0, &FREE4, -10.0, 10.0);
        for k in 0..=200 {
            let b = -10.0 + 0.1 * k as f64;
            assert!((cm.psi(b) - 2.0 * s.value(b.abs())).abs() < 1e-12, "b={b}");
            assert!(cm.env(b) <= cm.psi(b) + 1e-12);
        }
    }

    #[test]
    fn inner_only_envelope_is_exact() {
        let s = scad();
        let cm = CoordModel::penalized(&s, 1.0, &[Free, Free, Free, RightZero], -10.0, 10.0);
        assert_eq!((cm.lo(), cm.hi()), (-1.0, 1.0));
        for k in 0..=20 {
            let b = -1.0 + 0.1 * k as f64;
            assert!((cm.env(b) - cm.psi(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn outer_only_is_constant() {
        let s = scad();
        let cm = CoordModel::penalized(&s, 1.0, &[Free, Free, RightZero, LeftZero], -5.0, 5.0);
        assert!((cm.env(0.3) - 2.35).abs() < 1e-12);
        assert!((cm.psi(-4.0) - 2.35).abs() < 1e-12);
    }

    #[test]
    fn conflicting_sign_pairs_empty() {
        let m = PenaltySpec::mcp(0.5, 2.0).unwrap();
        let cm = CoordModel::penalized(&m, 1.0, &[RightZero, RightZero, LeftZero, Free], 0.5, 3.0);
        assert!(cm.is_empty());
    }

    #[test]
    fn prox_matches_scan() {
        let s = scad();
        let cm = CoordModel::penalized(&s, 1.0, &FREE4, -6.0, 6.0);
        for &(q, c) in &[(1.0, 1.5), (2.0, -3.0), (0.5, 0.1), (0.0, 0.2), (3.0, 20.0)] {
            let t = cm.prox(q, c);
            let f = |t: f64| 0.5 * q * t * t - c * t + cm.env(t);
            let best = (0..=120_000).map(|k| -6.0 + 1e-4 * k as f64).map(f).fold(f64::INFINITY, f64::min);
            assert!(f(t) <= best + 1e-9, "q={q} c={c} t={t}");
        }
    }
}
