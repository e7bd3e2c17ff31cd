//! Finite-depth adding machines: the +1 map, digit-wise addition with carry,
//! mixed-radix encoding, prime valuation profiles and orbit checks.

mod tower_check;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tower_check::{verify_tower, TowerCheckFailure, TowerReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OdometerError {
    #[error("alpha entry {index} is {value}; entries must be at least 2")]
    EntryTooSmall { index: usize, value: u64 },
    #[error("alpha sequence is empty")]
    EmptyAlpha,
    #[error("declared depth {declared} exceeds the {available} listed entries")]
    DepthTooLarge { declared: usize, available: usize },
    #[error("digit {digit} at index {index} is outside 0..{radix}")]
    DigitOutOfRange { index: usize, digit: u64, radix: u64 },
    #[error("element has depth {found}, alpha has depth {expected}")]
    DepthMismatch { expected: usize, found: usize },
    #[error("orbit needs {needed} states, exhaustion limit is {limit}")]
    SizeError { needed: String, limit: u64 },
    #[error("malformed alpha document: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaSequence {
    entries: Vec<u64>,
    declared_depth: usize,
}

impl AlphaSequence {
    pub fn new(entries: Vec<u64>) -> Result<Self, OdometerError> {
        let depth = entries.len();
        Self::with_depth(entries, depth)
    }

    pub fn with_depth(entries: Vec<u64>, declared_depth: usize) -> Result<Self, OdometerError> {
        if let Some((index, &value)) = entries.iter().enumerate().find(|(_, &v)| v < 2) {
            return Err(OdometerError::EntryTooSmall { index, value });
        }
        if declared_depth > entries.len() {
            return Err(OdometerError::DepthTooLarge { declared: declared_depth, available: entries.len() });
        }
        Ok(Self { entries, declared_depth })
    }

    /// The first `depth` terms of the periodic sequence `period, period, …`.
    pub fn periodic(period: &[u64], depth: usize) -> Result<Self, OdometerError> {
        if period.is_empty() {
            return Err(OdometerError::EmptyAlpha);
        }
        Self::new(period.iter().copied().cycle().take(depth).collect())
    }

    /// Entries up to the declared depth.
    pub fn entries(&self) -> &[u64] {
        &self.entries[..self.declared_depth]
    }

    pub fn declared_depth(&self) -> usize {
        self.declared_depth
    }

    /// `m_k = α(1)⋯α(k)`.
    pub fn modulus(&self, k: usize) -> BigUint {
        self.entries[..k].iter().map(|&a| BigUint::from(a)).product()
    }

    pub fn zero(&self) -> OdometerElement {
        OdometerElement { digits: vec![0; self.declared_depth] }
    }

    /// `(1, 0, 0, …)`.
    pub fn one(&self) -> OdometerElement {
        let mut e = self.zero();
        if let Some(d) = e.digits.first_mut() {
            *d = 1 % self.entries[0];
        }
        e
    }

    pub fn check(&self, x: &OdometerElement) -> Result<(), OdometerError> {
        if x.digits.len() != self.declared_depth {
            return Err(OdometerError::DepthMismatch { expected: self.declared_depth, found: x.digits.len() });
        }
        for (index, (&digit, &radix)) in x.digits.iter().zip(self.entries()).enumerate() {
            if digit >= radix {
                return Err(OdometerError::DigitOutOfRange { index, digit, radix });
            }
        }
        Ok(())
    }
}

/// Alpha document: either explicit `entries` or a repeating `periodic` block,
/// optionally truncated by `declared_depth`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AlphaFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_depth: Option<usize>,
}

impl AlphaFile {
    pub fn into_alpha(self) -> Result<AlphaSequence, OdometerError> {
        match (self.entries, self.periodic) {
            (Some(entries), None) => {
                let depth = self.declared_depth.unwrap_or(entries.len());
                AlphaSequence::with_depth(entries, depth)
            }
            (None, Some(period)) => {
                let depth = self
                    .declared_depth
                    .ok_or_else(|| OdometerError::Parse("periodic alpha needs declared_depth".into()))?;
                AlphaSequence::periodic(&period, depth)
            }
            _ => Err(OdometerError::Parse("give exactly one of entries or periodic".into())),
        }
    }
}

pub fn alpha_from_json(text: &str) -> Result<AlphaSequence, OdometerError> {
    let file: AlphaFile = serde_json::from_str(text).map_err(|e| OdometerError::Parse(e.to_string()))?;
    file.into_alpha()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OdometerElement {
    pub digits: Vec<u64>,
}

impl OdometerElement {
    pub fn new(digits: Vec<u64>) -> Self {
        Self { digits }
    }
}

/// +1 by the recursion `z₁ = (x₁+1) mod α(1)`, `z_{i+1} = x_{i+1}` when
/// `z_i ≥ x_i`, else `(x_{i+1}+1) mod α(i+1)`.
pub fn add_one_digits(alpha: &[u64], x: &[u64], out: &mut [u64]) {
    if x.is_empty() {
        return;
    }
    out[0] = (x[0] + 1) % alpha[0];
    for i in 1..x.len() {
        out[i] = if out[i - 1] >= x[i - 1] { x[i] } else { (x[i] + 1) % alpha[i] };
    }
}

/// Digit-wise sum with the carry moving to the right.
pub fn add_digits(alpha: &[u64], x: &[u64], y: &[u64], out: &mut [u64]) {
    let mut carry = 0;
    for i in 0..x.len() {
        let s = x[i] + y[i] + carry;
        if s >= alpha[i] {
            out[i] = s - alpha[i];
            carry = 1;
        } else {
            out[i] = s;
            carry = 0;
        }
    }
}

pub fn add_one(alpha: &AlphaSequence, x: &OdometerElement) -> Result<OdometerElement, OdometerError> {
    alpha.check(x)?;
    let mut out = vec![0; x.digits.len()];
    add_one_digits(alpha.entries(), &x.digits, &mut out);
    Ok(OdometerElement { digits: out })
}

pub fn add(alpha: &AlphaSequence, x: &OdometerElement, y: &OdometerElement) -> Result<OdometerElement, OdometerError> {
    alpha.check(x)?;
    alpha.check(y)?;
    let mut out = vec![0; x.digits.len()];
    add_digits(alpha.entries(), &x.digits, &y.digits, &mut out);
    Ok(OdometerElement { digits: out })
}

/// `x₁ + x₂·α(1) + x₃·α(1)α(2) + …` over the first `k` digits.
pub fn encode_mixed_radix(alpha: &AlphaSequence, x: &OdometerElement, k: usize) -> BigUint {
    let mut value = BigUint::from(0u32);
    for i in (0..k).rev() {
        value = value * alpha.entries[i] + x.digits[i];
    }
    value
}

/// Machine-word encoding for exhaustive loops; `None` on overflow.
pub fn encode_u64(alpha: &[u64], x: &[u64]) -> Option<u64> {
    let mut value: u64 = 0;
    for i in (0..x.len()).rev() {
        value = value.checked_mul(alpha[i])?.checked_add(x[i])?;
    }
    Some(value)
}

/// Inverse of [`encode_u64`].
pub fn decode_u64(alpha: &[u64], mut code: u64, out: &mut [u64]) {
    for (d, &a) in out.iter_mut().zip(alpha) {
        *d = code % a;
        code /= a;
    }
}

pub fn primes_up_to(p: u64) -> Vec<u64> {
    (2..=p).filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)).collect()
}

fn valuation(mut n: u64, p: u64) -> u64 {
    let mut v = 0;
    while n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeProfile {
    pub primes_up_to: u64,
    /// Summed p-adic valuations over the declared depth.
    pub valuations: BTreeMap<u64, u64>,
    /// Primes whose count reached the cap, meaning "at least this much".
    pub capped: BTreeSet<u64>,
}

impl PrimeProfile {
    pub fn get(&self, p: u64) -> u64 {
        self.valuations.get(&p).copied().unwrap_or(0)
    }

    /// Clamps counts at `cap` and marks the clamped primes.
    pub fn with_cap(mut self, cap: u64) -> Self {
        for (p, v) in self.valuations.iter_mut() {
            if *v >= cap {
                *v = cap;
                self.capped.insert(*p);
            }
        }
        self
    }

    /// Primes ≤ the bound with positive valuation.
    pub fn support(&self) -> Vec<u64> {
        self.valuations.iter().filter(|(_, &v)| v > 0).map(|(&p, _)| p).collect()
    }
}

pub fn m_alpha_profile(alpha: &AlphaSequence, primes_up_to_p: u64) -> PrimeProfile {
    let valuations = primes_up_to(primes_up_to_p)
        .into_iter()
        .map(|p| (p, alpha.entries().iter().map(|&a| valuation(a, p)).sum()))
        .collect();
    PrimeProfile { primes_up_to: primes_up_to_p, valuations, capped: BTreeSet::new() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Conjugacy {
    EqualProfile,
    Differ { prime: u64, valuations: (u64, u64) },
    Inconclusive { prime: u64 },
}

/// Compares prime profiles. Without a cap both profiles are exact at the
/// declared depth. With a cap, a prime capped on both sides counts as equal and
/// a prime capped on one side only cannot be decided.
pub fn conjugate_up_to_depth(
    alpha: &AlphaSequence,
    beta: &AlphaSequence,
    primes_up_to_p: u64,
    cap: Option<u64>,
) -> Conjugacy {
    let (mut pa, mut pb) = (m_alpha_profile(alpha, primes_up_to_p), m_alpha_profile(beta, primes_up_to_p));
    if let Some(c) = cap {
        pa = pa.with_cap(c);
        pb = pb.with_cap(c);
    }
    let mut inconclusive = None;
    for p in primes_up_to(primes_up_to_p) {
        let (ca, cb) = (pa.capped.contains(&p), pb.capped.contains(&p));
        match (ca, cb) {
            (true, true) => {}
            (false, false) => {
                if pa.get(p) != pb.get(p) {
                    return Conjugacy::Differ { prime: p, valuations: (pa.get(p), pb.get(p)) };
                }
            }
            _ => {
                inconclusive.get_or_insert(p);
            }
        }
    }
    match inconclusive {
        Some(prime) => Conjugacy::Inconclusive { prime },
        None => Conjugacy::EqualProfile,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum CylinderCheck {
    Pass { states: u64 },
    /// The orbit returned to `repeated` after `step` steps, before reaching `missing`.
    Fail { step: u64, repeated: Vec<u64>, missing: Vec<u64> },
}

/// Checks that the orbit of zero under `step` visits every depth-`k` prefix
/// exactly once and closes after `m_k` steps.
pub fn orbit_cylinder_check_with<F>(alpha: &AlphaSequence, k: usize, limit: u64, step: F) -> Result<CylinderCheck, OdometerError>
where
    F: Fn(&[u64], &[u64], &mut [u64]),
{
    let radices = &alpha.entries()[..k];
    let m = match encode_u64(radices, &radices.iter().map(|a| a - 1).collect::<Vec<_>>()) {
        Some(top) if top < limit => top + 1,
        _ => return Err(OdometerError::SizeError { needed: alpha.modulus(k).to_string(), limit }),
    };
    let mut seen = vec![false; m as usize];
    let mut x = vec![0u64; k];
    let mut next = vec![0u64; k];
    seen[0] = true;
    for s in 1..=m {
        step(radices, &x, &mut next);
        std::mem::swap(&mut x, &mut next);
        let code = encode_u64(radices, &x).expect("fits by construction") as usize;
        if s == m {
            if code != 0 {
                return Ok(CylinderCheck::Fail { step: s, repeated: x, missing: vec![0; k] });
            }
            break;
        }
        if seen[code] {
            let missing_code = seen.iter().position(|v| !v).expect("some prefix unvisited") as u64;
            let mut missing = vec![0; k];
            decode_u64(radices, missing_code, &mut missing);
            return Ok(CylinderCheck::Fail { step: s, repeated: x, missing });
        }
        seen[code] = true;
    }
    Ok(CylinderCheck::Pass { states: m })
}

pub fn orbit_cylinder_check(alpha: &AlphaSequence, k: usize, limit: u64) -> Result<CylinderCheck, OdometerError> {
    orbit_cylinder_check_with(alpha, k, limit, add_one_digits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(e: &[u64]) -> AlphaSequence {
        AlphaSequence::new(e.to_vec()).unwrap()
    }

    fn el(d: &[u64]) -> OdometerElement {
        OdometerElement::new(d.to_vec())
    }

    #[test]
    fn add_one_examples() {
        assert_eq!(add_one(&alpha(&[2, 2, 2]), &el(&[0, 0, 0])).unwrap(), el(&[1, 0, 0]));
        assert_eq!(add_one(&alpha(&[2, 2, 2]), &el(&[1, 1, 0])).unwrap(), el(&[0, 0, 1]));
        assert_eq!(add_one(&alpha(&[2, 3]), &el(&[1, 2])).unwrap(), el(&[0, 0]));
        assert!(matches!(add_one(&alpha(&[2, 3]), &el(&[2, 0])), Err(OdometerError::DigitOutOfRange { .. })));
    }

    #[test]
    fn add_examples() {
        let a = alpha(&[2, 3]);
        assert_eq!(add(&a, &el(&[1, 1]), &a.zero()).unwrap(), el(&[1, 1]));
        assert_eq!(add(&a, &el(&[1, 1]), &el(&[1, 1])).unwrap(), el(&[0, 0]));
    }

    #[test]
    fn encode_examples() {
        let a = alpha(&[2, 3]);
        assert_eq!(encode_mixed_radix(&a, &a.zero(), 2), BigUint::from(0u32));
        assert_eq!(encode_mixed_radix(&a, &el(&[1, 2]), 2), BigUint::from(5u32));
        assert_eq!(encode_mixed_radix(&alpha(&[2, 2, 2]), &el(&[0, 0, 1]), 3), BigUint::from(4u32));
    }

    #[test]
    fn profile_examples() {
        let p = m_alpha_profile(&alpha(&[2]), 7);
        assert_eq!((p.get(2), p.get(3), p.get(5), p.get(7)), (1, 0, 0, 0));
        let p = m_alpha_profile(&alpha(&[6, 10, 15]), 7);
        assert_eq!((p.get(2), p.get(3), p.get(5), p.get(7)), (2, 2, 2, 0));
        assert_eq!(m_alpha_profile(&alpha(&[4, 4]), 7).get(2), 4);
    }

    #[test]
    fn conjugacy_examples() {
        let a = AlphaSequence::periodic(&[2, 3], 50).unwrap();
        // the same modulus 6^25 as `a`
        let b = AlphaSequence::periodic(&[6], 25).unwrap();
        assert_eq!(conjugate_up_to_depth(&a, &a, 13, None), Conjugacy::EqualProfile);
        assert_eq!(conjugate_up_to_depth(&a, &b, 13, None), Conjugacy::EqualProfile);
        let b50 = AlphaSequence::periodic(&[6], 50).unwrap();
        assert_eq!(conjugate_up_to_depth(&a, &b50, 13, None), Conjugacy::Differ { prime: 2, valuations: (25, 50) });
        let pa = m_alpha_profile(&a, 13);
        assert_eq!((pa.get(2), pa.get(3), pa.get(5)), (25, 25, 0));
        assert_eq!(
            conjugate_up_to_depth(&alpha(&[2, 2]), &alpha(&[3, 3]), 13, None),
            Conjugacy::Differ { prime: 2, valuations: (2, 0) }
        );
        assert_eq!(
            conjugate_up_to_depth(&alpha(&[4, 4]), &alpha(&[4]), 13, Some(3)),
            Conjugacy::Inconclusive { prime: 2 }
        );
        assert_eq!(conjugate_up_to_depth(&alpha(&[8, 8]), &alpha(&[16]), 13, Some(3)), Conjugacy::EqualProfile);
    }

    #[test]
    fn cylinder_examples() {
        assert_eq!(orbit_cylinder_check(&alpha(&[2]), 1, 1 << 20).unwrap(), CylinderCheck::Pass { states: 2 });
        assert_eq!(orbit_cylinder_check(&alpha(&[2, 3]), 2, 1 << 20).unwrap(), CylinderCheck::Pass { states: 6 });
        let no_carry = |a: &[u64], x: &[u64], out: &mut [u64]| {
            out.copy_from_slice(x);
            out[0] = (x[0] + 1) % a[0];
        };
        let r = orbit_cylinder_check_with(&alpha(&[2, 3]), 2, 1 << 20, no_carry).unwrap();
        assert_eq!(r, CylinderCheck::Fail { step: 2, repeated: vec![0, 0], missing: vec![0, 1] });
        assert!(matches!(orbit_cylinder_check(&alpha(&[6; 10]), 10, 1000), Err(OdometerError::SizeError { .. })));
    }

    #[test]
    fn alpha_parsing() {
        assert!(matches!(alpha_from_json(r#"{"entries":[2,1]}"#), Err(OdometerError::EntryTooSmall { index: 1, .. })));
        let a = alpha_from_json(r#"{"periodic":[2,3],"declared_depth":5}"#).unwrap();
        assert_eq!(a.entries(), &[2, 3, 2, 3, 2]);
    }
}
