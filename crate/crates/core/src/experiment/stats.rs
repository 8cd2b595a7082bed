use std::fmt::Write as _;
use std::path::Path;

use crate::table;
use crate::{Error, Result};

/// Numbers of successful transports before each loss.
///
/// A censored entry ended without a loss (the run stopped first), so it
/// only bounds the number of successes from below.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRecord {
    pub n_list: Vec<u64>,
    pub censored: Vec<bool>,
    /// Dimensionless transport time; NaN when unknown.
    pub tau: f64,
    /// Per-attempt loss probability without transport.
    pub background_loss_rate: f64,
}

impl SuccessRecord {
    pub fn new(n_list: Vec<u64>, tau: f64, background_loss_rate: f64) -> Result<Self> {
        let censored = vec![false; n_list.len()];
        Self::with_censoring(n_list, censored, tau, background_loss_rate)
    }

    pub fn with_censoring(n_list: Vec<u64>, censored: Vec<bool>, tau: f64, background_loss_rate: f64) -> Result<Self> {
        let r = Self {
            n_list,
            censored,
            tau,
            background_loss_rate,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::invalid("success record needs at least one entry"));
        }
        if self.censored.len() != self.n_list.len() {
            return Err(Error::invalid("censoring flags must match the counts"));
        }
        if !(0.0..1.0).contains(&self.background_loss_rate) {
            return Err(Error::invalid("background loss rate must be in [0, 1)"));
        }
        Ok(())
    }

    /// Splits a sequence of attempt outcomes (`true` = ion kept) into runs
    /// ending at each loss. A trailing run without a loss is censored.
    pub fn from_attempts(attempts: &[bool], tau: f64, background_loss_rate: f64) -> Result<Self> {
        let mut n_list = Vec::new();
        let mut censored = Vec::new();
        let mut n = 0u64;
        for &kept in attempts {
            if kept {
                n += 1;
            } else {
                n_list.push(n);
                censored.push(false);
                n = 0;
            }
        }
        if n > 0 || n_list.is_empty() {
            n_list.push(n);
            censored.push(true);
        }
        Self::with_censoring(n_list, censored, tau, background_loss_rate)
    }

    pub fn trials(&self) -> usize {
        self.n_list.len()
    }

    pub fn successes(&self) -> u64 {
        self.n_list.iter().sum()
    }

    pub fn losses(&self) -> u64 {
        self.censored.iter().filter(|&&c| !c).count() as u64
    }

    /// One count per line; censored counts carry a trailing `+`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# success-record v1 tau={} background={}\n# columns: n_i\n",
            table::fmt_exact(self.tau),
            table::fmt_exact(self.background_loss_rate)
        );
        for (n, c) in self.n_list.iter().zip(&self.censored) {
            let _ = writeln!(out, "{n}{}", if *c { "+" } else { "" });
        }
        out
    }

    /// Parses the record format. `tau` and the background rate come from
    /// the header when present and fall back to the given values.
    pub fn from_text(text: &str, tau: f64, background_loss_rate: f64) -> Result<Self> {
        let (mut tau, mut b) = (tau, background_loss_rate);
        let mut n_list = Vec::new();
        let mut censored = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if let Some(h) = s.strip_prefix('#') {
                let num = |v: &str| v.parse::<f64>().map_err(|_| Error::parse(line, format!("bad header value `{v}`")));
                if let Some(v) = table::header_value(h, "tau") {
                    tau = num(v)?;
                }
                if let Some(v) = table::header_value(h, "background") {
                    b = num(v)?;
                }
                continue;
            }
            if s.is_empty() {
                continue;
            }
            let (digits, c) = match s.strip_suffix('+') {
                Some(d) => (d.trim_end(), true),
                None => (s, false),
            };
            let n = digits
                .parse::<u64>()
                .map_err(|_| Error::parse(line, format!("expected a non-negative integer, got `{s}`")))?;
            n_list.push(n);
            censored.push(c);
        }
        Self::with_censoring(n_list, censored, tau, b)
    }

    pub fn read_file(path: impl AsRef<Path>, tau: f64, background_loss_rate: f64) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, tau, background_loss_rate)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessEstimate {
    /// Raw per-attempt success probability.
    pub p_tilde: f64,
    /// Success probability with the background channel removed.
    pub p_net: f64,
    /// 68% likelihood-profile interval for `p_net`.
    pub ci68: (f64, f64),
    /// No success was observed, so only an upper bound is meaningful.
    pub degenerate: bool,
}

/// Half the 68.3% quantile of chi-squared with one degree of freedom.
const PROFILE_DROP: f64 = 0.5;

/// Geometric maximum-likelihood fit `P(n) = p^n` with censoring.
///
/// With S successes and F observed losses the log-likelihood is
/// `S ln p + F ln(1 - p)`, maximal at `p = S / (S + F)`. The background
/// channel enters as `p_tilde = p_net (1 - b)`.
pub fn estimate_success(record: &SuccessRecord) -> Result<SuccessEstimate> {
    record.validate()?;
    let s = record.successes() as f64;
    let f = record.losses() as f64;
    let (p_tilde, lo, hi, degenerate) = if s == 0.0 && f == 0.0 {
        (f64::NAN, 0.0, 1.0, true)
    } else if f == 0.0 {
        (1.0, (-PROFILE_DROP / s).exp(), 1.0, false)
    } else if s == 0.0 {
        (0.0, 0.0, 1.0 - (-PROFILE_DROP / f).exp(), true)
    } else {
        let p = s / (s + f);
        let ll = |q: f64| s * q.ln() + f * (1.0 - q).ln();
        let target = ll(p) - PROFILE_DROP;
        let lo = bisect(|q| ll(q) - target, 0.0, p);
        let hi = bisect(|q| ll(q) - target, p, 1.0);
        (p, lo, hi, false)
    };
    if p_tilde.is_nan() {
        return Err(Error::Estimation("success record contains no attempts".into()));
    }
    let scale = 1.0 / (1.0 - record.background_loss_rate);
    Ok(SuccessEstimate {
        p_tilde,
        p_net: (p_tilde * scale).min(1.0),
        ci68: ((lo * scale).min(1.0), (hi * scale).min(1.0)),
        degenerate,
    })
}

/// Root of `g` between `a` and `b` where `g` changes sign once, excluding
/// the endpoints themselves.
fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inside = |x: f64| x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let ga = g(inside(a)).signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(inside(m)).signum() == ga {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::trial_rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Successes before the first failure at per-attempt probability p.
    fn geometric<R: Rng>(p: f64, rng: &mut R) -> u64 {
        let mut n = 0;
        while rng.random::<f64>() < p {
            n += 1;
        }
        n
    }

    #[test]
    fn closed_form_mle() {
        let r = SuccessRecord::new(vec![3, 7, 0, 10], 4.0, 0.0).unwrap();
        let e = estimate_success(&r).unwrap();
        assert!((e.p_tilde - 20.0 / 24.0).abs() < 1e-15);
        assert_eq!(e.p_net, e.p_tilde);
        let ll = |q: f64| 20.0 * q.ln() + 4.0 * (1.0 - q).ln();
        for end in [e.ci68.0, e.ci68.1] {
            assert!((ll(e.p_tilde) - ll(end) - 0.5).abs() < 1e-9);
        }
        assert!(e.ci68.0 < e.p_tilde && e.p_tilde < e.ci68.1);
    }

    #[test]
    fn no_losses_gives_lower_bound() {
        let r = SuccessRecord::with_censoring(vec![50, 50], vec![true, true], 100.0, 0.0).unwrap();
        let e = estimate_success(&r).unwrap();
        assert_eq!(e.p_tilde, 1.0);
        assert_eq!(e.ci68.1, 1.0);
        assert!((100.0 * e.ci68.0.ln() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let r = SuccessRecord::new(vec![0, 0, 0], 1.0, 0.0).unwrap();
        let e = estimate_success(&r).unwrap();
        assert_eq!(e.p_tilde, 0.0);
        assert!(e.degenerate);
        assert_eq!(e.ci68.0, 0.0);
        assert!(e.ci68.1 > 0.0 && e.ci68.1 < 0.3);
    }

    #[test]
    fn attempts_are_split_at_losses() {
        let a = [true, true, false, false, true, true, true, false, true];
        let r = SuccessRecord::from_attempts(&a, 4.0, 0.01).unwrap();
        assert_eq!(r.n_list, vec![2, 0, 3, 1]);
        assert_eq!(r.censored, vec![false, false, false, true]);
        let back = SuccessRecord::from_text(&r.to_text(), f64::NAN, 0.0).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn text_errors_and_defaults() {
        let r = SuccessRecord::from_text("12\n  4+\n\n0\n", 6.0, 0.002).unwrap();
        assert_eq!(r.n_list, vec![12, 4, 0]);
        assert_eq!(r.tau, 6.0);
        match SuccessRecord::from_text("3\n-1\n", 1.0, 0.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(SuccessRecord::from_text("# nothing\n", 1.0, 0.0).is_err());
        assert!(SuccessRecord::new(vec![1], 1.0, 1.0).is_err());
    }

    #[test]
    fn coverage_near_nominal() {
        let p = 0.99;
        let reps = 400;
        let hits = (0..reps)
            .filter(|&k| {
                let mut rng = trial_rng(77, k);
                let n: Vec<u64> = (0..100).map(|_| geometric(p, &mut rng)).collect();
                let e = estimate_success(&SuccessRecord::new(n, 4.0, 0.0).unwrap()).unwrap();
                e.ci68.0 <= p && p <= e.ci68.1
            })
            .count();
        let cov = hits as f64 / reps as f64;
        assert!((0.6..0.76).contains(&cov), "coverage {cov}");
    }

    proptest! {
        #[test]
        fn background_correction_only_raises(
            n in prop::collection::vec(0u64..500, 1..20),
            b in 0.0f64..0.2,
        ) {
            let raw = estimate_success(&SuccessRecord::new(n.clone(), 4.0, 0.0).unwrap()).unwrap();
            let net = estimate_success(&SuccessRecord::new(n, 4.0, b).unwrap()).unwrap();
            prop_assert_eq!(raw.p_tilde, net.p_tilde);
            prop_assert!(net.p_net >= net.p_tilde);
            if b > 0.0 && net.p_tilde > 0.0 && net.p_tilde < 1.0 - b {
                prop_assert!(net.p_net > net.p_tilde);
            }
            prop_assert!((0.0..=1.0).contains(&net.p_net));
            prop_assert!(net.ci68.0 <= net.ci68.1);
        }
    }
}
