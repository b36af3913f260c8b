//! Synthetic IoT intrusion scenario: feature names, class prototypes and a
//! seeded generator.
//!
//! The anomalous prototype is the observed device state used throughout the
//! experiments; the benign prototype is scenario scaffolding with nominal
//! values for a healthy device. Encryption Status is a real value in [0, 1].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::entropy::BoxDomain;
use crate::error::{Error, Result};
use crate::model::Dataset;

pub const FEATURE_NAMES: [&str; 12] = [
    "Packet Loss (%)",
    "Latency (ms)",
    "Throughput (Mbps)",
    "Failed Auth Attempts",
    "Port Scans",
    "CPU Usage (%)",
    "Memory Usage (%)",
    "Battery Drain Rate",
    "Device Temperature (°C)",
    "Open Ports",
    "Firmware Age (days)",
    "Encryption Status",
];

pub const ANOMALOUS_PROTOTYPE: [f64; 12] = [12.3, 180.0, 0.5, 20.0, 15.0, 85.0, 92.0, 1.2, 78.0, 8.0, 350.0, 0.0];

pub const BENIGN_PROTOTYPE: [f64; 12] = [0.5, 20.0, 50.0, 1.0, 0.0, 30.0, 45.0, 0.3, 40.0, 2.0, 30.0, 1.0];

/// Indices of Failed Auth Attempts, Port Scans, Open Ports, Firmware Age and
/// Encryption Status.
pub const CRITICAL_FEATURES: [usize; 5] = [3, 4, 9, 10, 11];

/// Battery Drain Rate and Device Temperature are physical readings the
/// operator cannot set directly.
pub const IMMUTABLE_FEATURES: [usize; 2] = [7, 8];

pub const ENCRYPTION_INDEX: usize = 11;

/// Label of the anomalous class.
pub const ANOMALOUS_LABEL: f64 = 1.0;

/// Class separation in units of the within-class standard deviation.
pub const SEPARATION: f64 = 4.0;

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Within-class standard deviation per feature: `|anomalous - benign| / SEPARATION`.
pub fn within_class_std() -> [f64; 12] {
    let mut s = [0.0; 12];
    for (i, v) in s.iter_mut().enumerate() {
        *v = (ANOMALOUS_PROTOTYPE[i] - BENIGN_PROTOTYPE[i]).abs() / SEPARATION;
    }
    s
}

/// Perturbation bounds keeping `x0 + delta` physically plausible: every
/// feature stays nonnegative and below twice the larger prototype value, and
/// Encryption Status stays in [0, 1].
pub fn plausibility_box(x0: &[f64]) -> Result<BoxDomain> {
    if x0.len() != FEATURE_NAMES.len() {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_NAMES.len(),
            got: x0.len(),
        });
    }
    let mut lower = Vec::with_capacity(x0.len());
    let mut upper = Vec::with_capacity(x0.len());
    for (i, &x) in x0.iter().enumerate() {
        let cap = if i == ENCRYPTION_INDEX {
            1.0
        } else {
            2.0 * ANOMALOUS_PROTOTYPE[i].max(BENIGN_PROTOTYPE[i])
        };
        if !(0.0..=cap).contains(&x) {
            return Err(Error::InvalidInput(format!("feature {i} value {x} lies outside [0, {cap}]")));
        }
        lower.push(-x);
        upper.push(cap - x);
    }
    BoxDomain::new(lower, upper)
}

/// Alternating anomalous/benign rows with Gaussian noise around each
/// prototype. Row 0 is the anomalous prototype itself and row 1 the benign one.
pub fn generate_iot_data(n_rows: usize, seed: u64) -> Result<Dataset> {
    if n_rows < 4 {
        return Err(Error::InvalidInput(format!("n_rows must be at least 4, got {n_rows}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = within_class_std();
    let noise: Vec<Normal<f64>> = std
        .iter()
        .map(|s| Normal::new(0.0, *s).expect("finite nonnegative std"))
        .collect();
    let mut rows = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for r in 0..n_rows {
        let anomalous = r % 2 == 0;
        let center = if anomalous { &ANOMALOUS_PROTOTYPE } else { &BENIGN_PROTOTYPE };
        let row: Vec<f64> = if r < 2 {
            center.to_vec()
        } else {
            center.iter().zip(&noise).map(|(c, n)| c + n.sample(&mut rng)).collect()
        };
        rows.push(row);
        labels.push(if anomalous { ANOMALOUS_LABEL } else { 1.0 - ANOMALOUS_LABEL });
    }
    Dataset::new(rows, labels, feature_names())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototype_row_is_exact() {
        let d = generate_iot_data(10, 1).unwrap();
        assert_eq!(d.rows[0], ANOMALOUS_PROTOTYPE.to_vec());
        assert_eq!(d.labels[0], 1.0);
        assert_eq!(d.feature_names.len(), 12);
    }

    #[test]
    fn nearest_centroid_separates_classes() {
        let d = generate_iot_data(2000, 2).unwrap();
        let std = within_class_std();
        let dist = |r: &[f64], c: &[f64; 12]| -> f64 {
            r.iter().zip(c).zip(&std).map(|((a, b), s)| ((a - b) / s).powi(2)).sum()
        };
        let correct = d
            .rows
            .iter()
            .zip(&d.labels)
            .filter(|(r, l)| {
                let pred = if dist(r, &ANOMALOUS_PROTOTYPE) < dist(r, &BENIGN_PROTOTYPE) { 1.0 } else { 0.0 };
                pred == **l
            })
            .count();
        assert!(correct as f64 / d.len() as f64 >= 0.99);
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(generate_iot_data(50, 3).unwrap(), generate_iot_data(50, 3).unwrap());
        assert!(generate_iot_data(3, 3).is_err());
    }

    #[test]
    fn plausibility_box_contains_origin() {
        let b = plausibility_box(&ANOMALOUS_PROTOTYPE).unwrap();
        assert!(b.lower.iter().zip(&b.upper).all(|(l, u)| *l <= 0.0 && *u >= 0.0));
        assert_eq!(b.upper[ENCRYPTION_INDEX], 1.0);
        assert_eq!(b.lower[0], -12.3);
        assert!(plausibility_box(&[-1.0; 12]).is_err());
    }
}
