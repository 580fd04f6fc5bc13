//! Angular-momentum combinatorics: exact half-integer bookkeeping,
//! Clebsch-Gordan coefficients, collective-sector degeneracies, and the bath
//! partition function.
//!
//! A bath of N spin-1/2 particles decomposes into collective sectors of total
//! spin j with degeneracy
//!
//! ```text
//!  nu_j = C(N, N/2 + j) - C(N, N/2 + j + 1),
//! ```
//!
//! and the thermal bath state exp(-beta J_z)/Z has
//!
//! ```text
//!  Z = 2^N cosh^N(beta/2)
//! ```
//!
//! in the +-1/2 eigenvalue convention used throughout this crate. Everything
//! here is evaluated with ln-factorials so that baths of several hundred
//! spins stay far from overflow: degeneracies and partition functions are
//! available in log form, and thermal weights should be combined in log space
//! before exponentiating.

use std::fmt;

use once_cell::sync::Lazy;

/// Largest factorial argument the shared table covers. CG evaluation needs
/// ln((j1+j2+J+1)!), so this bounds the usable total spin at roughly 1000 —
/// comfortably beyond baths of 400 spins plus a large central spin.
const SHARED_TABLE_LEN: usize = 2048;

// ---------------------------------------------------------------------------
// HalfInt
// ---------------------------------------------------------------------------

/// Exact half-integer: stores twice the value so that j = 0, 1/2, 1, 3/2, ...
/// and projections m of either sign are represented without rounding.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct HalfInt {
    twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };
    pub const HALF: HalfInt = HalfInt { twice: 1 };
    pub const ONE: HalfInt = HalfInt { twice: 2 };

    /// Construct from twice the value (2j or 2m).
    #[inline]
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt { twice }
    }

    /// Construct from an integer value.
    #[inline]
    pub const fn from_int(n: i32) -> Self {
        HalfInt { twice: 2 * n }
    }

    /// Twice the value, always exact.
    #[inline]
    pub const fn twice(self) -> i32 {
        self.twice
    }

    /// The value as a floating-point number.
    #[inline]
    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// True for 0, 1, 2, ... (even twice-value).
    #[inline]
    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// True when `self` and `other` are both integers or both half-odd.
    #[inline]
    pub const fn same_parity(self, other: HalfInt) -> bool {
        (self.twice - other.twice) % 2 == 0
    }

    /// Inclusive range from `lo` to `hi` in unit steps (twice-value step 2).
    pub fn range_inclusive(lo: HalfInt, hi: HalfInt) -> impl Iterator<Item = HalfInt> {
        (lo.twice..=hi.twice)
            .step_by(2)
            .map(HalfInt::from_twice)
    }

    /// Projections m = -j, ..., +j for magnitude `self`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        Self::range_inclusive(-self, self)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    #[inline]
    fn neg(self) -> HalfInt {
        HalfInt { twice: -self.twice }
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    #[inline]
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt { twice: self.twice + rhs.twice }
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    #[inline]
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt { twice: self.twice - rhs.twice }
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

// ---------------------------------------------------------------------------
// Log-factorial table
// ---------------------------------------------------------------------------

/// Precomputed ln(n!) values.
///
/// Built once and then read-only, so a single shared instance can be used
/// concurrently from any number of threads.
pub struct LogFactorialTable {
    table: Vec<f64>,
}

impl LogFactorialTable {
    /// Table covering ln(0!) through ln((len-1)!).
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "LogFactorialTable::new: length must be at least 1");
        let mut table = Vec::with_capacity(len);
        table.push(0.0);
        for n in 1..len {
            table.push(table[n - 1] + (n as f64).ln());
        }
        LogFactorialTable { table }
    }

    /// Process-wide shared table (see [`SHARED_TABLE_LEN`]).
    pub fn shared() -> &'static LogFactorialTable {
        static SHARED: Lazy<LogFactorialTable> =
            Lazy::new(|| LogFactorialTable::new(SHARED_TABLE_LEN));
        &SHARED
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// ln(n!).
    #[inline]
    pub fn ln_factorial(&self, n: usize) -> f64 {
        assert!(
            n < self.table.len(),
            "LogFactorialTable::ln_factorial: argument {} exceeds table length {}",
            n,
            self.table.len()
        );
        self.table[n]
    }

    /// ln(n!) where `twice_n` is an even twice-value (2n).
    #[inline]
    fn ln_factorial_twice(&self, twice_n: i32) -> f64 {
        debug_assert!(
            twice_n >= 0 && twice_n % 2 == 0,
            "ln_factorial_twice: argument {twice_n} must be an even nonnegative twice-value"
        );
        self.ln_factorial((twice_n / 2) as usize)
    }

    /// ln C(n, k); minus infinity when k is out of range.
    pub fn ln_binomial(&self, n: usize, k: i64) -> f64 {
        if k < 0 || k > n as i64 {
            return f64::NEG_INFINITY;
        }
        self.ln_factorial(n) - self.ln_factorial(k as usize) - self.ln_factorial(n - k as usize)
    }
}

// ---------------------------------------------------------------------------
// Clebsch-Gordan coefficients
// ---------------------------------------------------------------------------

/// Clebsch-Gordan coefficient C^{J M}_{j1 m1, j2 m2} in the Condon-Shortley
/// convention, evaluated by the Racah single-sum closed form with
/// ln-factorials. The largest log magnitude is factored out of the
/// alternating sum before exponentiating, keeping the evaluation finite for
/// total spins of several hundred.
///
/// Violated selection rules (m1 + m2 != M, triangle rule, |m| > j) return
/// exactly 0 — out-of-range magnetic numbers are routine in summation code
/// and are not errors.
///
/// # Arguments
///
/// * `j1`, `m1` - first angular momentum and its projection.
/// * `j2`, `m2` - second angular momentum and its projection.
/// * `j_tot`, `m_tot` - total angular momentum and projection.
/// * `lnfac` - log-factorial table covering at least j1 + j2 + j_tot + 1.
///
/// # Panics
///
/// Panics when a magnitude is negative or a (j, m) pair mixes integer and
/// half-odd values: those are malformed quantum numbers, not selection-rule
/// failures.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j_tot: HalfInt,
    m_tot: HalfInt,
    lnfac: &LogFactorialTable,
) -> f64 {
    let (tj1, tm1) = (j1.twice(), m1.twice());
    let (tj2, tm2) = (j2.twice(), m2.twice());
    let (tj, tm) = (j_tot.twice(), m_tot.twice());

    assert!(
        tj1 >= 0 && tj2 >= 0 && tj >= 0,
        "clebsch_gordan: magnitudes must be nonnegative, got j1={j1}, j2={j2}, J={j_tot}"
    );
    assert!(
        (tj1 + tm1) % 2 == 0 && (tj2 + tm2) % 2 == 0 && (tj + tm) % 2 == 0,
        "clebsch_gordan: (j, m) pairs must share parity, got (j1={j1}, m1={m1}), (j2={j2}, m2={m2}), (J={j_tot}, M={m_tot})"
    );

    // Selection rules: all return exactly zero.
    if tm1 + tm2 != tm {
        return 0.0;
    }
    if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 {
        return 0.0;
    }
    if tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return 0.0;
    }
    // Couplings of two integer/half-odd spins must land on the right parity.
    if (tj1 + tj2 + tj) % 2 != 0 {
        return 0.0;
    }

    let f = |x: i32| lnfac.ln_factorial_twice(x);

    let ln_prefactor = 0.5
        * (((tj + 1) as f64).ln()
            + f(tj1 + tj2 - tj)
            + f(tj1 - tj2 + tj)
            + f(-tj1 + tj2 + tj)
            - f(tj1 + tj2 + tj + 2)
            + f(tj + tm)
            + f(tj - tm)
            + f(tj1 - tm1)
            + f(tj1 + tm1)
            + f(tj2 - tm2)
            + f(tj2 + tm2));

    let k_min = 0.max((tj2 - tj - tm1) / 2).max((tj1 - tj + tm2) / 2);
    let k_max = ((tj1 + tj2 - tj) / 2)
        .min((tj1 - tm1) / 2)
        .min((tj2 + tm2) / 2);

    // Alternating Racah sum. The term logs are collected first so the largest
    // magnitude can be factored out; the sum then never overflows even when
    // individual terms would.
    let mut ln_terms: Vec<f64> = Vec::with_capacity((k_max - k_min + 1).max(0) as usize);
    for k in k_min..=k_max {
        let ln_term = ln_prefactor
            - (lnfac.ln_factorial(k as usize)
                + f(tj1 + tj2 - tj - 2 * k)
                + f(tj1 - tm1 - 2 * k)
                + f(tj2 + tm2 - 2 * k)
                + f(tj - tj2 + tm1 + 2 * k)
                + f(tj - tj1 - tm2 + 2 * k));
        ln_terms.push(ln_term);
    }
    let ln_max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if ln_max == f64::NEG_INFINITY {
        return 0.0;
    }
    let mut sum = 0.0;
    for (i, ln_term) in ln_terms.iter().enumerate() {
        let k = k_min + i as i32;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (ln_term - ln_max).exp();
    }
    sum * ln_max.exp()
}

// ---------------------------------------------------------------------------
// Degeneracies
// ---------------------------------------------------------------------------

/// ln of the multiplicity nu_j of collective spin `j` in a bath of `N`
/// spin-1/2 particles:
///
/// ```text
///  nu_j = C(N, N/2 + j) - C(N, N/2 + j + 1)
///       = C(N, N/2 + j) * (2j + 1) / (N/2 + j + 1),
/// ```
///
/// evaluated in the second (always-positive) form so the log never sees a
/// cancellation.
///
/// # Panics
///
/// Panics when 2j and N have different parity or j is outside [0, N/2].
pub fn ln_degeneracy(n_spins: u32, j: HalfInt, lnfac: &LogFactorialTable) -> f64 {
    let tj = j.twice();
    let n = n_spins as i32;
    assert!(
        tj >= 0 && tj <= n && (n - tj) % 2 == 0,
        "ln_degeneracy: j = {j} is not a collective spin of {n_spins} spin-1/2 particles"
    );
    let upper = ((n + tj) / 2) as usize;
    lnfac.ln_binomial(n_spins as usize, upper as i64) + ((tj + 1) as f64).ln()
        - ((upper + 1) as f64).ln()
}

/// Multiplicity nu_j as a plain real number (see [`ln_degeneracy`]).
pub fn degeneracy(n_spins: u32, j: HalfInt, lnfac: &LogFactorialTable) -> f64 {
    ln_degeneracy(n_spins, j, lnfac).exp()
}

/// Collective spin magnitudes j of a bath of `N` spin-1/2 particles, in
/// increasing order: 0 or 1/2 (depending on parity) up to N/2.
pub fn collective_spins(n_spins: u32) -> Vec<HalfInt> {
    let n = n_spins as i32;
    (n % 2..=n)
        .step_by(2)
        .map(HalfInt::from_twice)
        .collect()
}

// ---------------------------------------------------------------------------
// Partition function
// ---------------------------------------------------------------------------

/// ln Z for the thermal bath: ln Z = N ln(2 cosh(beta/2)), written as
/// |beta|/2 + ln(1 + exp(-|beta|)) per spin so large |beta| cannot overflow.
pub fn ln_partition_function(n_spins: u32, beta: f64) -> f64 {
    let half = beta.abs() / 2.0;
    let ln_single = half + (-2.0 * half).exp().ln_1p();
    n_spins as f64 * ln_single
}

/// Partition function Z = 2^N cosh^N(beta/2) of the bath.
pub fn partition_function(n_spins: u32, beta: f64) -> f64 {
    ln_partition_function(n_spins, beta).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Orthogonality, completeness and symmetry defects allowed for CG sums.
    const CG_RELATION_TOL: f64 = 1e-12;
    /// Relative tolerance for log-domain counting identities.
    const LOG_SUM_REL_TOL: f64 = 1e-12;
    /// Relative tolerance for the direct (non-log) partition cross-check.
    const PARTITION_DIRECT_REL_TOL: f64 = 1e-10;

    fn cg(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> f64 {
        clebsch_gordan(
            HalfInt::from_twice(tj1),
            HalfInt::from_twice(tm1),
            HalfInt::from_twice(tj2),
            HalfInt::from_twice(tm2),
            HalfInt::from_twice(tj),
            HalfInt::from_twice(tm),
            LogFactorialTable::shared(),
        )
    }

    #[test]
    fn half_int_basics() {
        let j = HalfInt::from_twice(3); // 3/2
        assert_eq!(j.value(), 1.5);
        assert!(!j.is_integer());
        assert_eq!(format!("{j}"), "3/2");
        assert_eq!(format!("{}", HalfInt::from_int(2)), "2");
        assert_eq!((j + HalfInt::HALF).twice(), 4);
        assert_eq!((-j).twice(), -3);
        let ms: Vec<i32> = HalfInt::from_int(1).projections().map(|m| m.twice()).collect();
        assert_eq!(ms, vec![-2, 0, 2]);
    }

    #[test]
    fn log_factorial_table_values() {
        let t = LogFactorialTable::new(12);
        assert_eq!(t.ln_factorial(0), 0.0);
        assert_eq!(t.ln_factorial(1), 0.0);
        assert!((t.ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
        // Monotone nondecreasing with increments ln(n).
        for n in 1..12 {
            assert!(t.ln_factorial(n) >= t.ln_factorial(n - 1));
        }
        assert!((t.ln_binomial(4, 2) - (6f64).ln()).abs() < 1e-14);
        assert_eq!(t.ln_binomial(4, 5), f64::NEG_INFINITY);
        assert_eq!(t.ln_binomial(4, -1), f64::NEG_INFINITY);
    }

    #[test]
    fn cg_examples() {
        // Stretched state: a single product state.
        assert_eq!(cg(1, 1, 1, 1, 2, 2), 1.0);
        // Two-spin singlet amplitude.
        assert!((cg(1, 1, 1, -1, 0, 0) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((cg(1, -1, 1, 1, 0, 0) + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        // M > J selection rule.
        assert_eq!(cg(2, 2, 1, 1, 2, 4), 0.0);
        // Triangle rule.
        assert_eq!(cg(2, 0, 1, 1, 7, 1), 0.0);
        // m1 + m2 != M.
        assert_eq!(cg(2, 2, 1, 1, 3, 1), 0.0);
        // |m| > j is a selection-rule zero, not an error.
        assert_eq!(cg(2, 4, 1, -1, 3, 3), 0.0);
        // Known 1 x 1/2 value: C^{3/2,1/2}_{1,0,1/2,1/2} = sqrt(2/3).
        assert!((cg(2, 0, 1, 1, 3, 1) - (2f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "magnitudes must be nonnegative")]
    fn cg_rejects_negative_magnitude() {
        cg(-2, 0, 1, 1, 3, 1);
    }

    #[test]
    #[should_panic(expected = "must share parity")]
    fn cg_rejects_parity_mismatch() {
        cg(2, 1, 1, 1, 3, 2);
    }

    #[test]
    fn cg_orthogonality_small_j() {
        // Sum over m1 of C^{J M} C^{J' M} = delta_{J J'} for all j1, j2 <= 4.
        let mut worst = 0.0f64;
        for tj1 in 0i32..=8 {
            for tj2 in 0..=8 {
                for tj in ((tj1 - tj2).abs()..=tj1 + tj2).step_by(2) {
                    for tjp in ((tj1 - tj2).abs()..=tj1 + tj2).step_by(2) {
                        for tm in (-tj.min(tjp)..=tj.min(tjp)).step_by(2) {
                            let mut s = 0.0;
                            for tm1 in (-tj1..=tj1).step_by(2) {
                                let tm2 = tm - tm1;
                                if tm2.abs() > tj2 {
                                    continue;
                                }
                                s += cg(tj1, tm1, tj2, tm2, tj, tm)
                                    * cg(tj1, tm1, tj2, tm2, tjp, tm);
                            }
                            let target = if tj == tjp { 1.0 } else { 0.0 };
                            worst = worst.max((s - target).abs());
                        }
                    }
                }
            }
        }
        assert!(worst < CG_RELATION_TOL, "orthogonality defect {worst:.3e}");
    }

    #[test]
    fn cg_completeness_small_j() {
        // Sum over (J, M) of C^{JM}_{j1 m1 j2 m2} C^{JM}_{j1 m1' j2 m2'}
        // = delta_{m1 m1'} delta_{m2 m2'} for all j1, j2 <= 4.
        let mut worst = 0.0f64;
        for tj1 in 0i32..=8 {
            for tj2 in 0..=8 {
                for tm1 in (-tj1..=tj1).step_by(2) {
                    for tm2 in (-tj2..=tj2).step_by(2) {
                        for tm1p in (-tj1..=tj1).step_by(2) {
                            let tm2p = tm1 + tm2 - tm1p; // only M-conserving pairs contribute
                            if tm2p.abs() > tj2 {
                                continue;
                            }
                            let mut s = 0.0;
                            for tj in ((tj1 - tj2).abs()..=tj1 + tj2).step_by(2) {
                                let tm = tm1 + tm2;
                                if tm.abs() > tj {
                                    continue;
                                }
                                s += cg(tj1, tm1, tj2, tm2, tj, tm)
                                    * cg(tj1, tm1p, tj2, tm2p, tj, tm);
                            }
                            let target = if tm1 == tm1p && tm2 == tm2p { 1.0 } else { 0.0 };
                            worst = worst.max((s - target).abs());
                        }
                    }
                }
            }
        }
        assert!(worst < CG_RELATION_TOL, "completeness defect {worst:.3e}");
    }

    #[test]
    fn cg_m_negation_symmetry() {
        // C^{JM}_{j1 m1 j2 m2} = (-1)^{j1+j2-J} C^{J,-M}_{j1,-m1,j2,-m2}.
        let mut worst = 0.0f64;
        for tj1 in 0i32..=6 {
            for tj2 in 0..=6 {
                for tj in ((tj1 - tj2).abs()..=tj1 + tj2).step_by(2) {
                    for tm1 in (-tj1..=tj1).step_by(2) {
                        for tm2 in (-tj2..=tj2).step_by(2) {
                            let tm = tm1 + tm2;
                            if tm.abs() > tj {
                                continue;
                            }
                            let lhs = cg(tj1, tm1, tj2, tm2, tj, tm);
                            let sign = if ((tj1 + tj2 - tj) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                            let rhs = sign * cg(tj1, -tm1, tj2, -tm2, tj, -tm);
                            worst = worst.max((lhs - rhs).abs());
                        }
                    }
                }
            }
        }
        assert!(worst < CG_RELATION_TOL, "m-negation symmetry defect {worst:.3e}");
    }

    #[test]
    fn degeneracy_examples() {
        let lnfac = LogFactorialTable::shared();
        assert!((degeneracy(2, HalfInt::from_int(1), lnfac) - 1.0).abs() < 1e-12);
        assert!((degeneracy(2, HalfInt::ZERO, lnfac) - 1.0).abs() < 1e-12);
        assert!((degeneracy(4, HalfInt::from_int(1), lnfac) - 3.0).abs() < 1e-12);
        assert!((degeneracy(4, HalfInt::from_int(2), lnfac) - 1.0).abs() < 1e-12);
        assert!((degeneracy(4, HalfInt::ZERO, lnfac) - 2.0).abs() < 1e-12);
        assert!((degeneracy(3, HalfInt::HALF, lnfac) - 2.0).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "is not a collective spin")]
    fn degeneracy_rejects_parity_mismatch() {
        ln_degeneracy(4, HalfInt::HALF, LogFactorialTable::shared());
    }

    #[test]
    fn degeneracy_sum_rule_log_domain() {
        // Sum over j of nu_j (2j + 1) = 2^N, checked as a log-domain identity.
        let lnfac = LogFactorialTable::shared();
        for n in [1u32, 2, 3, 4, 7, 20, 101, 400] {
            let ln_terms: Vec<f64> = collective_spins(n)
                .into_iter()
                .map(|j| ln_degeneracy(n, j, lnfac) + ((j.twice() + 1) as f64).ln())
                .collect();
            let ln_max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = ln_terms.iter().map(|l| (l - ln_max).exp()).sum();
            let ln_sum = ln_max + s.ln();
            let expect = n as f64 * std::f64::consts::LN_2;
            assert!(
                (ln_sum - expect).abs() < LOG_SUM_REL_TOL * expect.abs(),
                "degeneracy sum rule fails at N = {n}: ln sum {ln_sum} vs {expect}"
            );
        }
    }

    #[test]
    fn partition_function_examples() {
        assert!((partition_function(2, 0.0) - 4.0).abs() < 1e-12);
        let expect = 2.0 * 1f64.cosh();
        assert!((partition_function(1, 2.0) - expect).abs() < 1e-12 * expect);
        let ln_expect = 101.0 * (2.0 * 0.125f64.cosh()).ln();
        assert!((ln_partition_function(101, 0.25) - ln_expect).abs() < 1e-12 * ln_expect);
        // Large beta must not overflow: ln Z ~ N beta / 2.
        let ln_z = ln_partition_function(400, 500.0);
        assert!(ln_z.is_finite() && (ln_z - 400.0 * 250.0) < 1.0);
    }

    #[test]
    fn partition_function_matches_sector_sum_direct() {
        // Z = sum over (j, m) of nu_j exp(-beta m), directly for small N.
        let lnfac = LogFactorialTable::shared();
        for (n, beta) in [(1u32, 0.7), (2, 0.25), (6, 0.5), (31, 1.0), (60, 0.25)] {
            let mut s = 0.0;
            for j in collective_spins(n) {
                let nu = degeneracy(n, j, lnfac);
                for m in j.projections() {
                    s += nu * (-beta * m.value()).exp();
                }
            }
            let z = partition_function(n, beta);
            assert!(
                (s - z).abs() < PARTITION_DIRECT_REL_TOL * z,
                "partition cross-check fails at N = {n}, beta = {beta}: {s} vs {z}"
            );
        }
    }

    #[test]
    fn partition_function_matches_sector_sum_log_domain() {
        // Same identity for large N, comparing logs.
        let lnfac = LogFactorialTable::shared();
        for (n, beta) in [(101u32, 0.25), (201, 0.5), (400, 0.25)] {
            let mut ln_terms = Vec::new();
            for j in collective_spins(n) {
                let ln_nu = ln_degeneracy(n, j, lnfac);
                for m in j.projections() {
                    ln_terms.push(ln_nu - beta * m.value());
                }
            }
            let ln_max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = ln_terms.iter().map(|l| (l - ln_max).exp()).sum();
            let ln_sum = ln_max + s.ln();
            let ln_z = ln_partition_function(n, beta);
            assert!(
                (ln_sum - ln_z).abs() < LOG_SUM_REL_TOL * ln_z.abs(),
                "log partition cross-check fails at N = {n}, beta = {beta}"
            );
        }
    }

    #[test]
    fn collective_spins_parity() {
        assert_eq!(
            collective_spins(4).iter().map(|j| j.twice()).collect::<Vec<_>>(),
            vec![0, 2, 4]
        );
        assert_eq!(
            collective_spins(5).iter().map(|j| j.twice()).collect::<Vec<_>>(),
            vec![1, 3, 5]
        );
    }
}
