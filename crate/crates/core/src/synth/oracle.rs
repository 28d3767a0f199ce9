//! Reference implementations used only to cross-check production code.
//!
//! These are deliberately naive transcriptions that share no code with the
//! fusion or calibrator modules: they read raw scores, recompute what they
//! need, and evaluate every case by direct recount.

use crate::types::{CalibrationArtifact, EmotionClass, MappingStrategy, ScoreRecord};

fn name(c: EmotionClass) -> &'static str {
    match c {
        EmotionClass::Ang => "Ang",
        EmotionClass::Sad => "Sad",
        EmotionClass::Hap => "Hap",
        EmotionClass::Neu => "Neu",
    }
}

/// Line-by-line merge of a single record.
pub fn oracle_merge(r: &ScoreRecord, calib: &CalibrationArtifact) -> EmotionClass {
    let p_s = r.ps().probs();
    let p_t = r.pt().probs();

    // speech prediction: first index holding the maximum
    let mut prediction = 0;
    for i in 1..4 {
        if p_s[i] > p_s[prediction] {
            prediction = i;
        }
    }
    // text prediction, same rule over [neg, neu, pos]
    let mut sentiment = 0;
    for i in 1..3 {
        if p_t[i] > p_t[sentiment] {
            sentiment = i;
        }
    }
    let labels = ["Ang", "Sad", "Hap", "Neu"];
    let primary = labels[prediction];

    let mut h = 0.0;
    for &p in p_s {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    if h < 0.0 {
        h = 0.0;
    }
    let mut v = 0.0;
    for &p in p_s {
        if p > 0.0 {
            v += p * (p.ln() + h) * (p.ln() + h);
        }
    }

    let t = calib
        .thresholds
        .iter()
        .find(|(c, _)| name(**c) == primary)
        .map(|(_, t)| *t)
        .expect("thresholds for every class");

    let emotion: &str;
    if h >= t.tau_e && v <= t.tau_v {
        let mut e = if sentiment == 1 {
            "Neu"
        } else if sentiment == 2 {
            "Hap"
        } else if calib.f_m == MappingStrategy::Refer {
            if p_s[0] >= p_s[1] {
                "Ang"
            } else {
                "Sad"
            }
        } else {
            let below = p_t[sentiment] <= t.tau_m;
            let ang = if calib.f_i { !below } else { below };
            if ang {
                "Ang"
            } else {
                "Sad"
            }
        };
        let change = format!("{primary}{e}");
        if calib
            .exclusion
            .iter()
            .any(|(a, b)| format!("{}{}", name(a), name(b)) == change)
        {
            e = primary;
        }
        emotion = e;
    } else {
        emotion = primary;
    }
    EmotionClass::ALL[labels.iter().position(|l| *l == emotion).unwrap()]
}

/// Exhaustive grid search by direct recount. Returns `None` when no
/// training record is predicted as `class`.
pub fn oracle_grid_search(
    train: &[ScoreRecord],
    class: EmotionClass,
    delta: u32,
    step: u32,
) -> Option<(f64, f64)> {
    let mine: Vec<&ScoreRecord> = train.iter().filter(|r| r.prediction() == class).collect();
    if mine.is_empty() {
        return None;
    }

    fn pct(values: &[f64], k: f64) -> f64 {
        let mut s = values.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = k.clamp(0.0, 100.0);
        let pos = (s.len() - 1) as f64 * k / 100.0;
        let i = pos as usize;
        if i + 1 >= s.len() || pos == i as f64 {
            return s[i];
        }
        s[i] + (pos - i as f64) * (s[i + 1] - s[i])
    }

    let hs: Vec<f64> = mine.iter().map(|r| r.entropy()).collect();
    let vs: Vec<f64> = mine.iter().map(|r| r.varentropy()).collect();
    let n = (2 * delta / step) as i64;

    let mut best: Option<(f64, usize, f64, f64)> = None;
    for k in 0..=n {
        let te = pct(&hs, 75.0 - delta as f64 + (k * step as i64) as f64);
        for l in 0..=n {
            let tv = pct(&vs, 25.0 - delta as f64 + (l * step as i64) as f64);
            let flagged: Vec<&&ScoreRecord> = mine
                .iter()
                .filter(|r| r.entropy() >= te && r.varentropy() <= tv)
                .collect();
            let d = flagged
                .iter()
                .filter(|r| r.label() != r.prediction())
                .count();
            let m = if flagged.is_empty() {
                0.0
            } else {
                d as f64 / flagged.len() as f64 * 100.0
            };
            let better = match best {
                None => true,
                Some((bm, bd, _, _)) => m > bm || (m == bm && d > bd),
            };
            if better {
                best = Some((m, d, te, tv));
            }
        }
    }
    best.map(|(_, _, te, tv)| (te, tv))
}

/// Double-double number: `hi + lo` with `|lo| <= ulp(hi) / 2`, about 32
/// significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let r = Dd::quick_two_sum(s.hi, s.lo + t.hi);
        Dd::quick_two_sum(r.hi, r.lo + t.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Dd::quick_two_sum(p, err + (self.hi * o.lo + self.lo * o.hi))
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let p = q1 * b;
        let p_err = q1.mul_add(b, -p);
        let rem = self.sub(Dd { hi: p, lo: p_err });
        let q2 = rem.hi / b;
        Dd::quick_two_sum(q1, q2)
    }

    fn scale(self, f: f64) -> Dd {
        // exact for powers of two
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn exp(self) -> Dd {
        let k = (self.hi / std::f64::consts::LN_2).round();
        // few squarings: each one doubles the relative rounding error
        let r = self.sub(Dd::LN2.mul(Dd::new(k))).scale(1.0 / 16.0);
        // Taylor series; |r| < 0.022 so 20 terms are far beyond 1e-32
        let mut term = Dd::new(1.0);
        let mut sum = Dd::new(1.0);
        for n in 1..=20 {
            term = term.mul(r).div_f64(n as f64);
            sum = sum.add(term);
        }
        for _ in 0..4 {
            sum = sum.mul(sum);
        }
        sum.scale(2f64.powi(k as i32))
    }

    /// Natural log by one Newton step from the `f64` estimate.
    fn ln(self) -> Dd {
        let y0 = Dd::new(self.hi.ln());
        let correction = self.mul(y0.neg().exp()).sub(Dd::new(1.0));
        y0.add(correction)
    }
}

/// Entropy in nats evaluated in double-double arithmetic.
pub fn oracle_entropy(p: &[f64]) -> f64 {
    entropy_dd(p).to_f64()
}

fn entropy_dd(p: &[f64]) -> Dd {
    let mut h = Dd::new(0.0);
    for &x in p {
        if x > 0.0 {
            h = h.sub(Dd::new(x).mul(Dd::new(x).ln()));
        }
    }
    h
}

/// Varentropy in nats² evaluated in double-double arithmetic.
pub fn oracle_varentropy(p: &[f64]) -> f64 {
    let h = entropy_dd(p);
    let mut v = Dd::new(0.0);
    for &x in p {
        if x > 0.0 {
            let d = Dd::new(x).ln().add(h);
            v = v.add(Dd::new(x).mul(d).mul(d));
        }
    }
    v.to_f64()
}
