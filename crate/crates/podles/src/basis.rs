//! Truncated bases for the modules V_N, spinor spaces V_N (+) V_{N+r}, and
//! the real-extension doubling.
//!
//! Ordering convention: components in declaration order, within a component
//! levels ascend in l, and within a level m ascends from -l to l. The top
//! level of a component is l_min + floor(L_max - l_min), so components with
//! different l_min parity never over- or under-shoot the requested cutoff.

use std::collections::HashMap;
use std::sync::Arc;

use crate::qcore::HalfInt;

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct Label {
    pub comp: usize,
    pub l: HalfInt,
    pub m: HalfInt,
}

/// One V_K component of a basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Module label K of this component.
    pub n: HalfInt,
    pub l_min: HalfInt,
    /// Actual top level after truncation.
    pub l_top: HalfInt,
    pub offset: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BasisKind {
    /// Single module V_N.
    Module { n: HalfInt },
    /// V_N (+) V_{N+r} with grading between the two halves.
    Spinor { n: HalfInt, r: HalfInt },
    /// [V_N, V_{N+r}, V_{-N-r}, V_{-N}]: a spinor space and its real extension.
    Doubled { n: HalfInt, r: HalfInt },
    /// V_N (+) V_{-N}: the quasi-Dirac pairing space of the simple cocycle.
    Pair { n: HalfInt },
}

#[derive(Debug, Clone)]
pub struct Basis {
    pub kind: BasisKind,
    pub l_max: HalfInt,
    pub comps: Vec<Component>,
    pub labels: Vec<Label>,
    index: HashMap<(usize, i64, i64), usize>,
    pub dim: usize,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.l_max == other.l_max
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BasisError {
    #[error("L_max = {l_max} is below l_min = {l_min}")]
    CutoffTooSmall { l_max: HalfInt, l_min: HalfInt },
    #[error("twist offset r = {0} must be a positive integer")]
    BadTwist(HalfInt),
}

fn levels(n: HalfInt, l_max: HalfInt) -> Result<(HalfInt, HalfInt), BasisError> {
    let l_min = n.abs();
    if l_max < l_min {
        return Err(BasisError::CutoffTooSmall { l_max, l_min });
    }
    let steps = l_max.floor_diff(l_min);
    Ok((l_min, l_min + steps))
}

impl Basis {
    fn build(kind: BasisKind, comp_labels: &[HalfInt], l_max: HalfInt) -> Result<Arc<Basis>, BasisError> {
        let mut comps = Vec::new();
        let mut labels = Vec::new();
        let mut index = HashMap::new();
        let mut offset = 0usize;
        for (c, &n) in comp_labels.iter().enumerate() {
            let (l_min, l_top) = levels(n, l_max)?;
            let start = offset;
            let mut l = l_min;
            while l <= l_top {
                let mut m = -l;
                while m <= l {
                    index.insert((c, l.twice, m.twice), labels.len());
                    labels.push(Label { comp: c, l, m });
                    offset += 1;
                    m = m + 1;
                }
                l = l + 1;
            }
            comps.push(Component { n, l_min, l_top, offset: start, dim: offset - start });
        }
        Ok(Arc::new(Basis { kind, l_max, comps, labels, index, dim: offset }))
    }

    /// V_N truncated at L_max.
    pub fn module(n: HalfInt, l_max: HalfInt) -> Result<Arc<Basis>, BasisError> {
        Self::build(BasisKind::Module { n }, &[n], l_max)
    }

    /// H_{N,r} = V_N (+) V_{N+r}, both truncated at the same L_max.
    pub fn spinor(n: HalfInt, r: HalfInt, l_max: HalfInt) -> Result<Arc<Basis>, BasisError> {
        if !r.is_integer() || r.twice <= 0 {
            return Err(BasisError::BadTwist(r));
        }
        Self::build(BasisKind::Spinor { n, r }, &[n, n + r], l_max)
    }

    /// H_{N,r} (+) H_{-N-r,r}: components [V_N, V_{N+r}, V_{-N-r}, V_{-N}].
    pub fn doubled(n: HalfInt, r: HalfInt, l_max: HalfInt) -> Result<Arc<Basis>, BasisError> {
        if !r.is_integer() || r.twice <= 0 {
            return Err(BasisError::BadTwist(r));
        }
        Self::build(BasisKind::Doubled { n, r }, &[n, n + r, -n - r, -n], l_max)
    }

    /// V_N (+) V_{-N} for the simple index pairing.
    pub fn pair(n: HalfInt, l_max: HalfInt) -> Result<Arc<Basis>, BasisError> {
        Self::build(BasisKind::Pair { n }, &[n, -n], l_max)
    }

    pub fn index_of(&self, comp: usize, l: HalfInt, m: HalfInt) -> Option<usize> {
        self.index.get(&(comp, l.twice, m.twice)).copied()
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    /// All indices with l <= l_top - bandwidth in their component; products of
    /// up to `bandwidth` band operators are truncation-exact on these columns.
    pub fn interior_window(&self, bandwidth: i64) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, lab)| lab.l <= self.comps[lab.comp].l_top - bandwidth)
            .map(|(i, _)| i)
            .collect()
    }

    /// Boolean mask form of `interior_window`, convenient for residual scans.
    pub fn interior_mask(&self, bandwidth: i64) -> Vec<bool> {
        let mut mask = vec![false; self.dim];
        for i in self.interior_window(bandwidth) {
            mask[i] = true;
        }
        mask
    }

    /// Default truncation: 40 for integer N grids, 81/2 for half-integer.
    pub fn default_l_max(n: HalfInt) -> HalfInt {
        if n.is_integer() {
            HalfInt::from_int(40)
        } else {
            HalfInt::new(81)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(t: i64) -> HalfInt {
        HalfInt::new(t)
    }

    #[test]
    fn module_dimensions() {
        assert_eq!(Basis::module(h(0), h(4)).unwrap().dim, 9); // 1+3+5
        assert_eq!(Basis::module(h(1), h(5)).unwrap().dim, 12); // 2+4+6
        assert_eq!(Basis::module(h(-2), h(2)).unwrap().dim, 3); // single level l=1
    }

    #[test]
    fn spinor_dimensions() {
        let b = Basis::spinor(h(-1), HalfInt::from_int(1), h(3)).unwrap();
        assert_eq!(b.comps[0].dim, 6);
        assert_eq!(b.comps[1].dim, 6);
        let b = Basis::spinor(HalfInt::from_int(1), HalfInt::from_int(1), HalfInt::from_int(2)).unwrap();
        assert_eq!(b.comps[0].dim, 8);
        assert_eq!(b.comps[1].dim, 5);
        let b = Basis::spinor(h(-3), HalfInt::from_int(1), h(3)).unwrap();
        assert_eq!(b.comps[0].dim, 4);
        assert_eq!(b.comps[1].dim, 6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Basis::module(h(4), h(2)).is_err());
        assert!(Basis::spinor(h(0), h(1), h(4)).is_err()); // r = 1/2
        assert!(Basis::spinor(h(0), h(-2), h(4)).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let b = Basis::doubled(h(1), HalfInt::from_int(1), h(9)).unwrap();
        for (i, lab) in b.labels.iter().enumerate() {
            assert_eq!(b.index_of(lab.comp, lab.l, lab.m), Some(i));
        }
    }

    #[test]
    fn interior_window_contracts() {
        let b = Basis::module(h(0), HalfInt::from_int(10)).unwrap();
        let w2 = b.interior_window(2);
        assert!(w2.iter().all(|&i| b.label(i).l <= HalfInt::from_int(8)));
        assert_eq!(b.interior_window(0).len(), b.dim);
        let small = Basis::module(h(0), HalfInt::from_int(3)).unwrap();
        assert!(small.interior_window(4).is_empty());
        // nesting
        let w3 = b.interior_window(3);
        assert!(w3.iter().all(|i| w2.contains(i)));
    }

    #[test]
    fn mixed_parity_components_share_top() {
        // V_{-3/2} next to V_{-1/2} truncated at 40: tops must be 79/2 both,
        // not one rounded up past the other.
        let b = Basis::doubled(h(-3), HalfInt::from_int(1), HalfInt::from_int(40)).unwrap();
        for c in &b.comps {
            assert_eq!(c.l_top, h(79));
        }
    }
}
