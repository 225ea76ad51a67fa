//! Arrival picking on receiver traces.

use super::WaveFieldRecord;

/// Default fraction of a receiver's peak `|u|` that counts as an arrival.
pub const DEFAULT_ARRIVAL_FRACTION: f64 = 0.05;

/// Time of the first step where `|u|` at `receiver` exceeds
/// `threshold_fraction` of that receiver's peak `|u|`.
///
/// Returns `None` when the trace never rises above the threshold, which
/// includes an all-zero trace.
pub fn first_arrival(record: &WaveFieldRecord, receiver: usize, threshold_fraction: f64) -> Option<f64> {
    let mag = record.magnitude(receiver);
    first_exceedance(&mag, threshold_fraction).map(|t| (t + 1) as f64 * record.dt)
}

/// Time of the first step where `|u|` at `receiver` exceeds the absolute
/// `level`. Useful for comparing two runs against one shared threshold.
pub fn first_crossing(record: &WaveFieldRecord, receiver: usize, level: f64) -> Option<f64> {
    (0..record.n_steps)
        .find(|&t| record.get(receiver, t, 0).hypot(record.get(receiver, t, 1)) > level)
        .map(|t| (t + 1) as f64 * record.dt)
}

/// Peak `|u|` at `receiver` over the whole record.
pub fn peak_magnitude(record: &WaveFieldRecord, receiver: usize) -> f64 {
    record.magnitude(receiver).into_iter().fold(0.0, f64::max)
}

/// Time at which `trial` first departs from `reference` at `receiver` by more
/// than `threshold_fraction` of the reference's peak `|u|`.
///
/// With two runs that share everything but one scatterer, this is the arrival
/// of the first wave produced by that scatterer.
pub fn divergence_time(
    trial: &WaveFieldRecord,
    reference: &WaveFieldRecord,
    receiver: usize,
    threshold_fraction: f64,
) -> Option<f64> {
    assert_eq!(trial.n_steps, reference.n_steps, "records must have equal length");
    let peak = reference.magnitude(receiver).into_iter().fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    (0..trial.n_steps)
        .find(|&t| {
            let dx = trial.get(receiver, t, 0) - reference.get(receiver, t, 0);
            let dy = trial.get(receiver, t, 1) - reference.get(receiver, t, 1);
            dx.hypot(dy) > threshold_fraction * peak
        })
        .map(|t| (t + 1) as f64 * trial.dt)
}

fn first_exceedance(trace: &[f64], fraction: f64) -> Option<usize> {
    let peak = trace.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    trace.iter().position(|&v| v > fraction * peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ReceiverBinding;

    fn record(values: &[f64]) -> WaveFieldRecord {
        let recv = ReceiverBinding {
            particle: 0,
            target: [0.0; 2],
            position: [0.0; 2],
        };
        let mut r = WaveFieldRecord::zeros(0.5, values.len(), vec![recv]);
        for (t, &v) in values.iter().enumerate() {
            r.set(0, t, 0, v);
        }
        r
    }

    #[test]
    fn absolute_crossing() {
        let r = record(&[0.0, 0.1, -0.3, 0.2]);
        assert_eq!(first_crossing(&r, 0, 0.2), Some(1.5));
        assert_eq!(first_crossing(&r, 0, 0.3), None);
        assert_eq!(peak_magnitude(&r, 0), 0.3);
    }

    #[test]
    fn zero_trace_has_no_arrival() {
        assert_eq!(first_arrival(&record(&[0.0; 8]), 0, 0.05), None);
    }

    #[test]
    fn loaded_receiver_arrives_on_first_step() {
        assert_eq!(first_arrival(&record(&[1.0, 2.0, 0.5]), 0, 0.05), Some(0.5));
    }

    #[test]
    fn threshold_is_relative_to_peak() {
        let r = record(&[0.0, 0.01, 0.2, 1.0, -4.0]);
        // peak 4, threshold 0.2: first strictly larger value is 1.0 at index 3
        assert_eq!(first_arrival(&r, 0, 0.05), Some(2.0));
        assert_eq!(first_arrival(&r, 0, 1.0), None);
    }

    #[test]
    fn divergence_between_twins() {
        let a = record(&[0.0, 1.0, 2.0, 1.0]);
        let b = record(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(divergence_time(&a, &b, 0, 0.1), Some(2.0));
        assert_eq!(divergence_time(&a, &a, 0, 0.1), None);
    }
}
