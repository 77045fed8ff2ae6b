//! Dirac operators (twisted and generalized), the grading, the real
//! structure J on the doubled space, and the axiom battery: spectra and
//! kernels, bounded commutators, the commutant condition, and order-one
//! (exact or up to K_q).

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::bandop::{classify_kq, BandOperator, OpError};
use crate::basis::{Basis, BasisError, BasisKind};
use crate::qcore::{DeformationParams, HalfInt};
use crate::report::{CheckResult, VerificationReport};
use crate::sphere_std::{GenName, GeneratorRep};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, thiserror::Error)]
pub enum DiracError {
    #[error("basis kind unsuitable for this construction: {0}")]
    WrongBasis(String),
    #[error("operator is not component-paired and (l,m)-diagonal")]
    NotPaired,
    #[error("q = {0} too close to 1 for this estimate (limit 0.95)")]
    QNearOne(f64),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Op(#[from] OpError),
}

/// Component pairs (col-side, row-side) swapped by a Dirac flavor, with the
/// module label K of the col side of the forward direction.
pub(crate) fn dirac_pairs(basis: &Basis) -> Result<Vec<(usize, usize)>, DiracError> {
    match basis.kind {
        BasisKind::Spinor { .. } | BasisKind::Pair { .. } => Ok(vec![(0, 1)]),
        BasisKind::Doubled { .. } => Ok(vec![(0, 1), (2, 3)]),
        BasisKind::Module { .. } => {
            Err(DiracError::WrongBasis("Dirac operators need a two-component space".into()))
        }
    }
}

/// The twisted Dirac: |l,m> in V_K maps to sqrt([l-K][l+K+1]) |l,m> in the
/// partner component, zero when the partner level does not exist. On a
/// doubled basis this builds the real extension D (+) D' in one go.
pub fn build_dirac_twisted(
    params: &DeformationParams,
    basis: &Arc<Basis>,
) -> Result<BandOperator, DiracError> {
    let pairs = dirac_pairs(basis)?;
    let mut d = BandOperator::zero(basis.clone(), 0);
    for &(ca, cb) in &pairs {
        let k = basis.comps[ca].n.to_f64();
        for (src, dst) in [(ca, cb), (cb, ca)] {
            let c = &basis.comps[src];
            for j in c.offset..c.offset + c.dim {
                let lab = basis.label(j);
                let lf = lab.l.to_f64();
                let prod = params.qnumber(lf - k) * params.qnumber(lf + k + 1.0);
                let coef = if prod > 0.0 { prod.sqrt() } else { 0.0 };
                if coef != 0.0 {
                    if let Some(i) = basis.index_of(dst, lab.l, lab.m) {
                        d.add_entry(i, j, re(coef));
                    }
                }
            }
        }
    }
    d.finalize();
    Ok(d)
}

/// The generalized (quasi-)Dirac: d_K q^{-l} component swaps, zero below the
/// level where the partner opens up. On the doubled half the coefficients
/// are conjugated, which is what lets J intertwine the two halves.
///
/// Self-adjoint iff d_nr = conj(d_n); other choices build fine but the
/// caller should consult [`is_self_adjoint_choice`].
pub fn build_dirac_general(
    d_n: Complex64,
    d_nr: Complex64,
    params: &DeformationParams,
    basis: &Arc<Basis>,
) -> Result<BandOperator, DiracError> {
    let pairs = dirac_pairs(basis)?;
    let mut d = BandOperator::zero(basis.clone(), 0);
    for (pidx, &(ca, cb)) in pairs.iter().enumerate() {
        let (fwd, bwd) = if pidx == 0 { (d_n, d_nr) } else { (d_nr.conj(), d_n.conj()) };
        for (src, dst, coef) in [(ca, cb, fwd), (cb, ca, bwd)] {
            let c = &basis.comps[src];
            for j in c.offset..c.offset + c.dim {
                let lab = basis.label(j);
                if let Some(i) = basis.index_of(dst, lab.l, lab.m) {
                    d.add_entry(i, j, coef * re(params.qpow(-lab.l.to_f64())));
                }
            }
        }
    }
    d.finalize();
    Ok(d)
}

pub fn is_self_adjoint_choice(d_n: Complex64, d_nr: Complex64) -> bool {
    (d_nr - d_n.conj()).norm() == 0.0
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// +1 on the first component of each pair (the V_N side).
    UpPlus,
    /// +1 on the V_{N+r} side (the index-computation convention).
    DownPlus,
}

/// Grading: diagonal +-1, constant on components, alternating within each
/// Dirac pair. On the doubled basis the mirror half alternates the same way,
/// which simultaneously anticommutes with D (+) D' and with J.
pub fn build_grading(basis: &Arc<Basis>, orientation: Orientation) -> BandOperator {
    let sign = |comp: usize| -> f64 {
        let base = if comp % 2 == 0 { 1.0 } else { -1.0 };
        match orientation {
            Orientation::UpPlus => base,
            Orientation::DownPlus => -base,
        }
    };
    let b = basis.clone();
    BandOperator::diagonal(basis.clone(), move |j| re(sign(b.label(j).comp)))
}

/// The real structure on the doubled space: J |l,m> = i^{2m} |l,-m> with the
/// component flip 0<->3, 1<->2 (V_K to V_{-K-r} throughout). Antilinear.
pub fn build_reality(basis: &Arc<Basis>) -> Result<BandOperator, DiracError> {
    if !matches!(basis.kind, BasisKind::Doubled { .. }) {
        return Err(DiracError::WrongBasis("the real structure lives on the doubled space".into()));
    }
    let flip = [3usize, 2, 1, 0];
    let mut j_op = BandOperator::zero(basis.clone(), 0);
    j_op.antilinear = true;
    for j in 0..basis.dim {
        let lab = basis.label(j);
        // i^{2m} as a quarter-turn count: 2m is exactly lab.m.twice
        let phase = match lab.m.twice.rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        if let Some(i) = basis.index_of(flip[lab.comp], lab.l, -lab.m) {
            j_op.add_entry(i, j, phase);
        }
    }
    j_op.finalize();
    Ok(j_op)
}

/// Sign s with J^2 = s (exactly +-1 for the J built here).
pub fn j_squared_sign(j: &BandOperator) -> Result<f64, DiracError> {
    let jj = j.compose(j)?;
    let s = jj.entry(0, 0).re.signum();
    for k in 0..jj.basis.dim {
        let col = jj.col(k);
        if col.len() != 1 || col[0].0 != k || (col[0].1 - re(s)).norm() > 1e-12 {
            return Err(DiracError::NotPaired);
        }
    }
    Ok(s)
}

/// J x J^{-1}, using J^{-1} = s J when J^2 = s.
pub fn conj_by_j(x: &BandOperator, j: &BandOperator) -> Result<BandOperator, DiracError> {
    let s = j_squared_sign(j)?;
    Ok(j.compose(x)?.compose(&j.scale(re(s)))?)
}

/// Structural real-structure checks: J^2 sign by the parity of N, the
/// anticommutation with the grading, and unit-modulus isometry columns.
pub fn check_reality(
    j: &BandOperator,
    gamma: &BandOperator,
    n: HalfInt,
) -> Result<VerificationReport, DiracError> {
    let mut report = VerificationReport::new();
    let expected = if n.is_integer() { 1.0 } else { -1.0 };
    let s = j_squared_sign(j)?;
    report.push(
        CheckResult::new("reality/J^2", (s - expected).abs(), 0.0)
            .with_param("N", n)
            .with_param("sign", s),
    );
    let anti = j.compose(gamma)?.add(&gamma.compose(j)?)?.max_abs();
    report.push(CheckResult::new("reality/Jg+gJ", anti, 0.0).with_param("N", n));
    let iso = (0..j.basis.dim)
        .map(|k| {
            let col = j.col(k);
            if col.len() == 1 {
                (col[0].1.norm() - 1.0).abs()
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    report.push(CheckResult::new("reality/isometry", iso, 1e-15).with_param("N", n));
    Ok(report)
}

/// Residuals of JD - DJ and JD + DJ, relative to max|DJ|, so the caller can
/// read off the measured KO-sign rather than assert one.
pub fn jd_relation(d: &BandOperator, j: &BandOperator) -> Result<(f64, f64), DiracError> {
    let jd = j.compose(d)?;
    let dj = d.compose(j)?;
    let scale = dj.max_abs().max(1e-300);
    Ok((jd.sub(&dj)?.max_abs() / scale, jd.add(&dj)?.max_abs() / scale))
}

/// Commutant condition [J pi(x) J^{-1}, pi(y)] = 0 over all generator pairs.
pub fn check_commutant(
    rep: &GeneratorRep,
    j: &BandOperator,
    threshold: f64,
) -> Result<VerificationReport, DiracError> {
    let mask = rep.a.basis.interior_mask(2);
    let mut report = VerificationReport::new();
    for x in GenName::ALL {
        let jxj = conj_by_j(rep.get(x), j)?;
        for y in GenName::ALL {
            let r = jxj.commutator(rep.get(y))?;
            report.push(
                CheckResult::new(
                    format!("commutant/{},{}", x.as_str(), y.as_str()),
                    r.max_abs_on_window(&mask),
                    threshold,
                ),
            );
        }
    }
    Ok(report)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OrderOneMode {
    Exact,
    UpToKq,
}

/// Order-one condition [J pi(x) J^{-1}, [D, pi(y)]] over all generator
/// pairs: exact mode bounds interior entries at `threshold`; up_to_Kq mode
/// requires the residual's decay profile to classify in K_q.
pub fn check_order_one(
    rep: &GeneratorRep,
    d: &BandOperator,
    j: &BandOperator,
    mode: OrderOneMode,
    params: &DeformationParams,
    threshold: f64,
) -> Result<VerificationReport, DiracError> {
    let mask = rep.a.basis.interior_mask(2);
    let mut report = VerificationReport::new();
    for x in GenName::ALL {
        let jxj = conj_by_j(rep.get(x), j)?;
        for y in GenName::ALL {
            let inner = d.commutator(rep.get(y))?;
            let r = jxj.commutator(&inner)?;
            let name = format!("order-one/{},{}", x.as_str(), y.as_str());
            match mode {
                OrderOneMode::Exact => {
                    report.push(
                        CheckResult::new(name, r.max_abs_on_window(&mask), threshold)
                            .with_param("mode", "exact"),
                    );
                }
                OrderOneMode::UpToKq => {
                    let prof = r.decay_profile(4);
                    let cls = classify_kq(&prof, params);
                    let rate = prof.rate.unwrap_or(f64::NEG_INFINITY);
                    let in_kq = cls.map(|c| c.is_in_kq()).unwrap_or(false);
                    let mut check = CheckResult::new(name, 0.0, f64::INFINITY)
                        .with_param("mode", "up_to_Kq")
                        .with_param("rate", format!("{rate:.6}"));
                    if !in_kq {
                        check = check.failed().with_note("residual not in K_q");
                    }
                    report.push(check);
                }
            }
        }
    }
    Ok(report)
}

/// Boundedness evidence: the interior-window norm of [D, pi(x)] along an
/// increasing cutoff list must stabilize (last two within `rel_tol`
/// relatively). The builder is called once per cutoff.
pub fn check_bounded_commutators<F>(
    name: &str,
    build: F,
    l_list: &[HalfInt],
    rel_tol: f64,
) -> Result<VerificationReport, DiracError>
where
    F: Fn(HalfInt) -> Result<(BandOperator, GeneratorRep), DiracError>,
{
    assert!(l_list.len() >= 3, "need at least three cutoffs");
    let mut report = VerificationReport::new();
    let mut norms: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for &l_max in l_list {
        let (d, rep) = build(l_max)?;
        let window = d.basis.interior_window(2);
        for (gi, g) in GenName::ALL.into_iter().enumerate() {
            let c = d.commutator(rep.get(g))?;
            norms[gi].push(c.operator_norm(Some(&window))?);
        }
    }
    for (gi, g) in GenName::ALL.into_iter().enumerate() {
        let seq = &norms[gi];
        let last = seq[seq.len() - 1];
        let prev = seq[seq.len() - 2];
        let rel = (last - prev).abs() / last.max(1e-300);
        report.push(
            CheckResult::new(format!("{name}/bounded-commutator/{}", g.as_str()), rel, rel_tol)
                .with_param(
                    "norms",
                    seq.iter().map(|v| format!("{v:.9e}")).collect::<Vec<_>>().join(","),
                ),
        );
    }
    Ok(report)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SpectrumLine {
    /// Level l (as f64 to cover half-integers).
    pub level: f64,
    pub eigenvalue: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SpectrumReport {
    pub lines: Vec<SpectrumLine>,
    pub kernel_dim: usize,
}

impl SpectrumReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,eigenvalue,multiplicity\n");
        for line in &self.lines {
            out.push_str(&format!("{},{:.15e},{}\n", line.level, line.eigenvalue, line.multiplicity));
        }
        out.push_str(&format!("# kernel dimension: {}\n", self.kernel_dim));
        out
    }
}

/// Closed-form spectrum of a component-paired, (l,m)-diagonal self-adjoint
/// operator: each 2x2 swap block contributes +-|coefficient|, unmatched
/// states count into the kernel. Exact and O(dim).
pub fn spectrum(d: &BandOperator) -> Result<SpectrumReport, DiracError> {
    let basis = &d.basis;
    let pairs = dirac_pairs(basis)?;
    let partner: BTreeMap<usize, usize> =
        pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    // validate structure: every entry is a same-(l,m) component swap
    for jcol in 0..basis.dim {
        let lab = basis.label(jcol);
        for &(i, _) in d.col(jcol) {
            let labi = basis.label(i);
            if labi.l != lab.l || labi.m != lab.m || partner.get(&lab.comp) != Some(&labi.comp) {
                return Err(DiracError::NotPaired);
            }
        }
    }
    let mut kernel = 0usize;
    // (level.twice, quantized eigenvalue bits) -> (value, count)
    let mut agg: BTreeMap<(i64, i64, u64), (f64, usize)> = BTreeMap::new();
    for &(ca, cb) in &pairs {
        let comp_a = &basis.comps[ca];
        for j in comp_a.offset..comp_a.offset + comp_a.dim {
            let lab = basis.label(j);
            match basis.index_of(cb, lab.l, lab.m) {
                None => {
                    if d.col(j).is_empty() {
                        kernel += 1;
                    } else {
                        return Err(DiracError::NotPaired);
                    }
                }
                Some(i) => {
                    let up = d.entry(i, j);
                    let down = d.entry(j, i);
                    if (down - up.conj()).norm() > 1e-13 * up.norm().max(1.0) {
                        return Err(DiracError::NotPaired);
                    }
                    let v = up.norm();
                    if v == 0.0 {
                        kernel += 2;
                        continue;
                    }
                    for sign in [1.0f64, -1.0] {
                        let key = (lab.l.twice, sign as i64, v.to_bits());
                        agg.entry(key).and_modify(|e| e.1 += 1).or_insert((sign * v, 1));
                    }
                }
            }
        }
        // unmatched states on the cb side (levels below ca's opening)
        let comp_b = &basis.comps[cb];
        for j in comp_b.offset..comp_b.offset + comp_b.dim {
            let lab = basis.label(j);
            if basis.index_of(ca, lab.l, lab.m).is_none() {
                if d.col(j).is_empty() {
                    kernel += 1;
                } else {
                    return Err(DiracError::NotPaired);
                }
            }
        }
    }
    let lines = agg
        .into_iter()
        .map(|((ltwice, _, _), (value, count))| SpectrumLine {
            level: ltwice as f64 / 2.0,
            eigenvalue: value,
            multiplicity: count,
        })
        .collect();
    Ok(SpectrumReport { lines, kernel_dim: kernel })
}

/// The compact-perturbation estimate: delta_l = |sqrt([l-N][l+N+1]) -
/// c q^{-l}| with c = q^{-1/2}/(q^{-1}-q) must fall monotonically over the
/// tail and classify in K_q as a diagonal profile.
pub fn check_compact_perturbation(
    n: HalfInt,
    params: &DeformationParams,
    l_max: HalfInt,
) -> Result<VerificationReport, DiracError> {
    let q = params.q();
    if q > 0.95 {
        return Err(DiracError::QNearOne(q));
    }
    let c = params.qpow(-0.5) / (1.0 / q - q);
    let basis = Basis::module(n, l_max)?;
    let nf = n.to_f64();
    let b2 = basis.clone();
    let p2 = *params;
    let delta = BandOperator::diagonal(basis.clone(), move |j| {
        let lf = b2.label(j).l.to_f64();
        let prod = p2.qnumber(lf - nf) * p2.qnumber(lf + nf + 1.0);
        let ev = if prod > 0.0 { prod.sqrt() } else { 0.0 };
        // naive ev - c q^{-l} cancels catastrophically at large l; multiply
        // by the conjugate: prod - c^2 q^{-2l} collapses in closed form to
        // (q^{2l+1} - q^{2N+1} - q^{-2N-1}) / (q - q^-1)^2.
        let dq = 1.0 / q - q;
        let num = (p2.qpow(2.0 * lf + 1.0) - p2.qpow(2.0 * nf + 1.0) - p2.qpow(-2.0 * nf - 1.0))
            / (dq * dq);
        re((num / (ev + c * p2.qpow(-lf))).abs())
    });
    let prof = delta.decay_profile(1);
    // monotone decrease over the trailing half of the levels (above floor)
    let half = prof.p.len() / 2;
    let mut monotone = true;
    for w in prof.p[half..].windows(2) {
        if w[1] > w[0] && w[0] > crate::bandop::DECAY_FLOOR {
            monotone = false;
        }
    }
    let cls = classify_kq(&prof, params);
    let in_kq = cls.map(|k| k.is_in_kq()).unwrap_or(false);
    let rate = prof.rate.unwrap_or(f64::NEG_INFINITY);
    let mut check = CheckResult::new("compact-perturbation/delta", 0.0, f64::INFINITY)
        .with_param("N", n)
        .with_param("q", q)
        .with_param("c", format!("{c:.12e}"))
        .with_param("rate", format!("{rate:.6}"));
    if !monotone {
        check = check.failed().with_note("tail not monotonically decreasing");
    }
    if !in_kq {
        check = check.failed().with_note("diagonal profile not in K_q");
    }
    let mut report = VerificationReport::new();
    report.push(check);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_std::build_rep_std;

    fn h(t: i64) -> HalfInt {
        HalfInt::new(t)
    }
    fn hi(n: i64) -> HalfInt {
        HalfInt::from_int(n)
    }
    fn params() -> DeformationParams {
        DeformationParams::new(0.5).unwrap()
    }

    #[test]
    fn twisted_spectrum_half() {
        // N = -1/2: eigenvalues +-[l+1/2], multiplicity 2l+1, empty kernel
        let p = params();
        let basis = Basis::spinor(h(-1), hi(1), h(15)).unwrap();
        let d = build_dirac_twisted(&p, &basis).unwrap();
        let rep = spectrum(&d).unwrap();
        assert_eq!(rep.kernel_dim, 0);
        for line in &rep.lines {
            let l = line.level;
            assert!((line.eigenvalue.abs() - p.qnumber(l + 0.5)).abs() < 1e-12);
            assert_eq!(line.multiplicity, (2.0 * l + 1.0) as usize);
        }
    }

    #[test]
    fn kernel_dimension_law() {
        let p = params();
        for (twice_n, expect) in [(2, 3usize), (-2, 1), (4, 5), (-4, 3), (0, 1)] {
            let n = h(twice_n);
            let basis = Basis::spinor(n, hi(1), n.abs() + 10).unwrap();
            let d = build_dirac_twisted(&p, &basis).unwrap();
            let rep = spectrum(&d).unwrap();
            assert_eq!(rep.kernel_dim, expect, "N={n}");
        }
    }

    #[test]
    fn dense_eigensolve_cross_check() {
        use nalgebra::DMatrix;
        let p = params();
        let basis = Basis::spinor(hi(1), hi(1), hi(8)).unwrap();
        let d = build_dirac_twisted(&p, &basis).unwrap();
        let dim = basis.dim;
        let dense = DMatrix::from_fn(dim, dim, |i, j| d.entry(i, j).re);
        let mut dense_eigs: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
        dense_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rep = spectrum(&d).unwrap();
        let mut closed: Vec<f64> = Vec::new();
        for line in &rep.lines {
            closed.extend(std::iter::repeat(line.eigenvalue).take(line.multiplicity));
        }
        closed.extend(std::iter::repeat(0.0).take(rep.kernel_dim));
        closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(closed.len(), dense_eigs.len());
        for (a, b) in closed.iter().zip(&dense_eigs) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn general_zero_modes() {
        let p = params();
        let basis = Basis::spinor(hi(0), hi(2), hi(10)).unwrap();
        let d = build_dirac_general(re(1.0), re(1.0), &p, &basis).unwrap();
        let rep = spectrum(&d).unwrap();
        assert_eq!(rep.kernel_dim, 4); // l = 0, 1 of V_0 unmatched
        for line in &rep.lines {
            assert!((line.eigenvalue.abs() - p.qpow(-line.level)).abs() < 1e-10);
        }
        assert!(is_self_adjoint_choice(re(1.0), re(1.0)));
        assert!(!is_self_adjoint_choice(Complex64::new(0.0, 1.0), Complex64::new(0.0, 1.0)));
    }

    #[test]
    fn grading_anticommutes_structurally() {
        let p = params();
        let basis = Basis::doubled(h(1), hi(1), h(15)).unwrap();
        let d = build_dirac_twisted(&p, &basis).unwrap();
        for orient in [Orientation::UpPlus, Orientation::DownPlus] {
            let g = build_grading(&basis, orient);
            assert_eq!(d.anticommutator(&g).unwrap().max_abs(), 0.0);
            let gg = g.compose(&g).unwrap();
            let id = BandOperator::identity(basis.clone());
            assert_eq!(gg.sub(&id).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn reality_signs() {
        for (twice_n, expect) in [(1i64, -1.0), (-1, -1.0), (0, 1.0), (2, 1.0)] {
            let n = h(twice_n);
            let basis = Basis::doubled(n, hi(1), n.abs() + 10).unwrap();
            let j = build_reality(&basis).unwrap();
            assert_eq!(j_squared_sign(&j).unwrap(), expect, "N={n}");
            let g = build_grading(&basis, Orientation::UpPlus);
            let rep = check_reality(&j, &g, n).unwrap();
            assert!(rep.all_pass(), "{}", rep.to_json());
        }
    }

    #[test]
    fn commutant_holds_and_phase_matters() {
        let p = params();
        let basis = Basis::doubled(h(-1), hi(1), h(25)).unwrap();
        let rep = build_rep_std(&basis, &p);
        let j = build_reality(&basis).unwrap();
        let report = check_commutant(&rep, &j, 1e-11).unwrap();
        assert!(report.all_pass(), "{}", report.to_json());

        // Sensitivity control. Dropping the i^{2m} phase outright does NOT
        // break the commutant: the dropped factor differs from i^{2m} by a
        // multiplicative character in Delta-m, which scales each conjugated
        // generator by a constant and commutes through every bracket. A
        // phase that is not a character in Delta-m (quadratic in m) must
        // break at least one pair — that is what "the phase matters" means
        // at the level of this check.
        let mut j_bad = BandOperator::zero(basis.clone(), 0);
        j_bad.antilinear = true;
        let flip = [3usize, 2, 1, 0];
        for col in 0..basis.dim {
            let lab = basis.label(col);
            if let Some(i) = basis.index_of(flip[lab.comp], lab.l, -lab.m) {
                let theta = 0.7 * lab.m.to_f64() * lab.m.to_f64();
                j_bad.add_entry(i, col, Complex64::new(theta.cos(), theta.sin()));
            }
        }
        j_bad.finalize();
        let report = check_commutant(&rep, &j_bad, 1e-11).unwrap();
        assert!(!report.all_pass(), "non-character phase must fail the commutant");
    }

    #[test]
    fn order_one_exact_twisted() {
        let p = params();
        let basis = Basis::doubled(h(-1), hi(1), h(25)).unwrap();
        let rep = build_rep_std(&basis, &p);
        let d = build_dirac_twisted(&p, &basis).unwrap();
        let j = build_reality(&basis).unwrap();
        let report = check_order_one(&rep, &d, &j, OrderOneMode::Exact, &p, 1e-10).unwrap();
        assert!(report.all_pass(), "{}", report.to_json());
    }

    #[test]
    fn order_one_generalized_kq_only() {
        let p = params();
        let basis = Basis::doubled(hi(0), hi(2), hi(35)).unwrap();
        let rep = build_rep_std(&basis, &p);
        let d = build_dirac_general(re(1.0), re(1.0), &p, &basis).unwrap();
        let j = build_reality(&basis).unwrap();
        let kq = check_order_one(&rep, &d, &j, OrderOneMode::UpToKq, &p, 0.0).unwrap();
        assert!(kq.all_pass(), "{}", kq.to_json());
        let exact = check_order_one(&rep, &d, &j, OrderOneMode::Exact, &p, 1e-10).unwrap();
        assert!(!exact.all_pass(), "exact order-one must fail for the generalized D");
    }

    #[test]
    fn bounded_commutators_stabilize() {
        let p = params();
        let report = check_bounded_commutators(
            "twisted",
            |l_max| {
                let basis = Basis::spinor(h(-1), hi(1), l_max)?;
                let d = build_dirac_twisted(&p, &basis)?;
                Ok((d, build_rep_std(&basis, &p)))
            },
            &[h(41), h(61), h(81)],
            1e-6,
        )
        .unwrap();
        assert!(report.all_pass(), "{}", report.to_json());
    }

    #[test]
    fn d_squared_commutator_grows() {
        // sensitivity control: [D^2, pi(B)] must NOT stabilize
        let p = params();
        let mut norms = Vec::new();
        for &lt in &[21i64, 31, 41] {
            let basis = Basis::spinor(h(-1), hi(1), h(lt)).unwrap();
            let d = build_dirac_general(re(1.0), re(1.0), &p, &basis).unwrap();
            let d2 = d.compose(&d).unwrap();
            let rep = build_rep_std(&basis, &p);
            let c = d2.commutator(&rep.b).unwrap();
            norms.push(c.operator_norm(Some(&basis.interior_window(2))).unwrap());
        }
        assert!(norms[2] > 2.0 * norms[1] && norms[1] > 2.0 * norms[0], "{norms:?}");
    }

    #[test]
    fn compact_perturbation() {
        let p = params();
        let rep = check_compact_perturbation(h(-1), &p, h(61)).unwrap();
        assert!(rep.all_pass(), "{}", rep.to_json());
        let p8 = DeformationParams::new(0.8).unwrap();
        let rep = check_compact_perturbation(hi(2), &p8, hi(40)).unwrap();
        assert!(rep.all_pass(), "{}", rep.to_json());
        let p_near_one = DeformationParams::new(0.97).unwrap();
        assert!(matches!(
            check_compact_perturbation(hi(0), &p_near_one, hi(30)),
            Err(DiracError::QNearOne(_))
        ));
    }

    #[test]
    fn jd_sign_is_measured() {
        let p = params();
        let basis = Basis::doubled(h(1), hi(1), h(21)).unwrap();
        let d = build_dirac_twisted(&p, &basis).unwrap();
        let j = build_reality(&basis).unwrap();
        let (minus, plus) = jd_relation(&d, &j).unwrap();
        // exactly one of the two relations holds
        assert!(minus.min(plus) < 1e-13, "minus={minus} plus={plus}");
        assert!(minus.max(plus) > 0.5, "minus={minus} plus={plus}");
    }
}
