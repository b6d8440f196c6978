//! Event-based single-reservoir trip-based MFD simulation.
//!
//! All travelers inside the reservoir share the speed `V(n)`, so the distance
//! driven since the start of the day (the "odometer") advances identically for
//! everyone. A traveler who enters at odometer reading `D` leaves when the
//! odometer reaches `D + L`. Keeping in-network travelers in a min-heap on
//! that target makes the remaining-distance bookkeeping and arrival
//! re-prediction after every event exact, at `O(log n)` per event.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkParams {
    /// Jam accumulation, vehicles.
    pub n_jam: f64,
    /// Free-flow speed, meters per second.
    pub v_f: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self { n_jam: 4500.0, v_f: 9.78 }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_jam > 0.0) || !(self.v_f > 0.0) {
            return Err(Error::Config("network: n_jam and v_f must be positive".into()));
        }
        Ok(())
    }

    /// Network speed in meters per minute at accumulation `n`.
    pub fn speed(&self, n: f64) -> f64 {
        let x = 1.0 - n.max(0.0).min(self.n_jam) / self.n_jam;
        60.0 * self.v_f * x * x
    }

    /// Accumulation maximising production `n * V(n)`.
    pub fn critical_accumulation(&self) -> f64 {
        self.n_jam / 3.0
    }
}

pub fn speed(n: f64, net: &NetworkParams) -> f64 {
    net.speed(n)
}

pub fn critical_accumulation(net: &NetworkParams) -> f64 {
    net.critical_accumulation()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Minutes.
    pub time: f64,
    /// Accumulation right after the event.
    pub accumulation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySimResult {
    /// Minutes, indexed like the input.
    pub travel_times: Vec<f64>,
    /// One point per event; accumulation is constant until the next point.
    pub trajectory: Vec<TrajectoryPoint>,
    pub peak_accumulation: usize,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    target: f64,
    id: usize,
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for InFlight {}

impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for InFlight {
    fn cmp(&self, other: &Self) -> Ordering {
        self.target.total_cmp(&other.target).then(self.id.cmp(&other.id))
    }
}

/// Simulates one day. Departures at the same instant as an arrival are
/// processed first; remaining ties go by traveler index.
pub fn simulate_day(departures: &[f64], lengths: &[f64], net: &NetworkParams) -> Result<DaySimResult> {
    net.validate()?;
    if departures.len() != lengths.len() {
        return Err(Error::Input(format!(
            "{} departures but {} trip lengths",
            departures.len(),
            lengths.len()
        )));
    }
    if let Some(i) = lengths.iter().position(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Input(format!("trip length of traveler {i} is {}", lengths[i])));
    }
    if let Some(i) = departures.iter().position(|t| !t.is_finite()) {
        return Err(Error::Input(format!("departure of traveler {i} is not finite")));
    }

    let n_total = departures.len();
    let mut order: Vec<usize> = (0..n_total).collect();
    order.sort_by(|&a, &b| departures[a].total_cmp(&departures[b]).then(a.cmp(&b)));

    let mut travel_times = vec![0.0; n_total];
    let mut trajectory = Vec::with_capacity(2 * n_total);
    let mut inside: BinaryHeap<Reverse<InFlight>> = BinaryHeap::with_capacity(n_total);
    let mut next_departure = 0;
    let mut t = order.first().map_or(0.0, |&i| departures[i]);
    let mut odometer = 0.0;
    let mut peak = 0;

    while next_departure < n_total || !inside.is_empty() {
        let n = inside.len();
        let v = net.speed(n as f64);
        let arrival = match inside.peek() {
            Some(Reverse(top)) => {
                if v <= 0.0 {
                    return Err(Error::Stall { time: t, inside: n });
                }
                Some(t + (top.target - odometer).max(0.0) / v)
            }
            None => None,
        };
        let departure = order.get(next_departure).map(|&i| departures[i]);

        match (departure, arrival) {
            (Some(td), ta) if ta.map_or(true, |ta| td <= ta) => {
                let id = order[next_departure];
                odometer += v * (td - t);
                t = td;
                inside.push(Reverse(InFlight { target: odometer + lengths[id], id }));
                next_departure += 1;
            }
            (_, Some(ta)) => {
                let Reverse(done) = inside.pop().expect("arrival implies a traveler inside");
                odometer = done.target;
                t = ta;
                travel_times[done.id] = t - departures[done.id];
            }
            _ => unreachable!("loop guard ensures a pending event"),
        }
        let accumulation = inside.len();
        peak = peak.max(accumulation);
        trajectory.push(TrajectoryPoint { time: t, accumulation });
    }

    Ok(DaySimResult { travel_times, trajectory, peak_accumulation: peak })
}

/// Cumulative distance driven by a zero-impact vehicle along a finished
/// day's trajectory. Outside the event span the network is empty and the
/// free-flow speed applies.
#[derive(Debug, Clone)]
pub struct SpeedProfile {
    times: Vec<f64>,
    distance: Vec<f64>,
    speeds: Vec<f64>,
    free_flow: f64,
    time_index: BucketIndex,
    distance_index: BucketIndex,
}

/// Uniform buckets over a sorted key array so that "last key <= x" becomes a
/// search over a handful of entries. Results are identical to a full binary
/// search; a failed sanity check falls back to one.
#[derive(Debug, Clone)]
struct BucketIndex {
    lo: f64,
    inv_width: f64,
    starts: Vec<usize>,
}

impl BucketIndex {
    fn new(keys: &[f64]) -> Self {
        let (lo, hi) = match (keys.first(), keys.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Self { lo: 0.0, inv_width: 0.0, starts: vec![0] },
        };
        let n = keys.len().max(1);
        let inv_width = if hi > lo { n as f64 / (hi - lo) } else { 0.0 };
        let starts = (0..n)
            .map(|b| {
                let edge = lo + b as f64 / inv_width.max(f64::MIN_POSITIVE);
                keys.partition_point(|&k| k <= edge).max(1) - 1
            })
            .collect();
        Self { lo, inv_width, starts }
    }

    /// Largest `j` with `keys[j] <= x`, for `x >= keys[0]`.
    fn locate(&self, keys: &[f64], x: f64) -> usize {
        let nb = self.starts.len();
        let b = (((x - self.lo) * self.inv_width) as usize).min(nb - 1);
        let s = self.starts[b];
        let e = self.starts.get(b + 1).map_or(keys.len(), |&e| (e + 2).min(keys.len()));
        let j = s + keys[s..e].partition_point(|&k| k <= x).max(1) - 1;
        if keys[j] <= x && keys.get(j + 1).is_none_or(|&k| k > x) {
            j
        } else {
            keys.partition_point(|&k| k <= x) - 1
        }
    }
}

impl SpeedProfile {
    pub fn new(trajectory: &[TrajectoryPoint], net: &NetworkParams) -> Self {
        let free_flow = net.speed(0.0);
        let mut times = Vec::with_capacity(trajectory.len());
        let mut distance = Vec::with_capacity(trajectory.len());
        let mut speeds = Vec::with_capacity(trajectory.len());
        let mut d = 0.0;
        for (j, p) in trajectory.iter().enumerate() {
            if j > 0 {
                d += speeds[j - 1] * (p.time - times[j - 1]);
            }
            times.push(p.time);
            distance.push(d);
            speeds.push(net.speed(p.accumulation as f64));
        }
        if let Some(last) = speeds.last_mut() {
            *last = free_flow;
        }
        let time_index = BucketIndex::new(&times);
        let distance_index = BucketIndex::new(&distance);
        Self { times, distance, speeds, free_flow, time_index, distance_index }
    }

    /// Odometer reading at minute `t`, relative to the first event.
    pub fn distance_at(&self, t: f64) -> f64 {
        match self.times.first() {
            None => self.free_flow * t,
            Some(&t0) if t <= t0 => self.free_flow * (t - t0),
            Some(_) => {
                let j = self.time_index.locate(&self.times, t);
                self.distance[j] + self.speeds[j] * (t - self.times[j])
            }
        }
    }

    /// Minute at which the odometer reads `d`.
    pub fn time_at(&self, d: f64) -> f64 {
        match self.times.first() {
            None => d / self.free_flow,
            Some(&t0) if d <= 0.0 => t0 + d / self.free_flow,
            Some(_) => {
                let j = self.distance_index.locate(&self.distance, d);
                let v = self.speeds[j];
                if v > 0.0 {
                    self.times[j] + (d - self.distance[j]) / v
                } else {
                    self.times[j]
                }
            }
        }
    }

    /// Travel time of a fictional vehicle leaving at `dep` to cover `length` meters.
    pub fn travel_time(&self, dep: f64, length: f64) -> f64 {
        if !(length > 0.0) {
            return 0.0;
        }
        (self.time_at(self.distance_at(dep) + length) - dep).max(0.0)
    }
}

/// Travel time a non-counted vehicle departing at `dep` would experience.
pub fn probe_travel_time(result: &DaySimResult, dep: f64, length: f64, net: &NetworkParams) -> f64 {
    SpeedProfile::new(&result.trajectory, net).travel_time(dep, length)
}

/// Writes `event_time_min,accumulation`.
pub fn write_trajectory_csv<W: Write>(trajectory: &[TrajectoryPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["event_time_min", "accumulation"])?;
    for p in trajectory {
        w.write_record([p.time.to_string(), p.accumulation.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NET: NetworkParams = NetworkParams { n_jam: 4500.0, v_f: 9.78 };

    #[test]
    fn bucket_index_agrees_with_binary_search() {
        let mut keys = vec![0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 7.0, 7.0, 7.25, 30.0, 30.0, 31.0];
        for i in 0..200 {
            keys.push(31.0 + (i as f64 * 0.37).sin().abs() + i as f64 * 0.1);
        }
        keys.sort_by(f64::total_cmp);
        let idx = BucketIndex::new(&keys);
        let mut x = 0.0;
        while x < 60.0 {
            for probe in [x, keys[(x as usize).min(keys.len() - 1)]] {
                assert_eq!(idx.locate(&keys, probe), keys.partition_point(|&k| k <= probe) - 1, "{probe}");
            }
            x += 0.013;
        }
        let flat = [2.0; 5];
        assert_eq!(BucketIndex::new(&flat).locate(&flat, 2.0), 4);
        assert_eq!(BucketIndex::new(&flat).locate(&flat, 9.0), 4);
    }

    #[test]
    fn speed_function_values() {
        assert!((NET.speed(0.0) - 586.8).abs() < 1e-9);
        assert_eq!(NET.speed(4500.0), 0.0);
        assert_eq!(NET.speed(9000.0), 0.0);
        assert!((NET.speed(1500.0) - 586.8 * 4.0 / 9.0).abs() < 1e-9);
        assert!((NET.speed(1500.0) - 260.8).abs() < 1e-9);
    }

    #[test]
    fn critical_accumulation_is_a_third_of_jam() {
        assert_eq!(NET.critical_accumulation(), 1500.0);
        assert_eq!(NetworkParams { n_jam: 3.0, v_f: 1.0 }.critical_accumulation(), 1.0);
    }

    #[test]
    fn critical_accumulation_matches_grid_maximisation() {
        let net = NetworkParams { n_jam: 6000.0, v_f: 9.78 };
        let best = (0..=600_000)
            .map(|k| k as f64 * 0.01)
            .max_by(|a, b| (a * net.speed(*a)).total_cmp(&(b * net.speed(*b))))
            .unwrap();
        assert!((best - net.critical_accumulation()).abs() < 0.02);
        assert!((net.critical_accumulation() - 2000.0).abs() < 1e-12);
    }

    #[test]
    fn solo_traveler_uses_speed_at_one() {
        let r = simulate_day(&[0.0], &[4693.44], &NET).unwrap();
        let expected = 4693.44 / (586.8 * (1.0 - 1.0 / 4500.0f64).powi(2));
        assert!((r.travel_times[0] - expected).abs() < 1e-9);
        assert!((expected - 8.0019).abs() < 1e-4);
        assert_eq!(r.trajectory.len(), 2);
        assert_eq!(r.trajectory[0], TrajectoryPoint { time: 0.0, accumulation: 1 });
        assert_eq!(r.trajectory[1].accumulation, 0);
        assert!((r.trajectory[1].time - expected).abs() < 1e-9);
    }

    #[test]
    fn identical_travelers_share_travel_time() {
        let r = simulate_day(&[3.0, 3.0], &[4000.0, 4000.0], &NET).unwrap();
        assert_eq!(r.travel_times[0], r.travel_times[1]);
        assert_eq!(r.peak_accumulation, 2);
    }

    #[test]
    fn disjoint_trips_do_not_interact() {
        let solo = 4600.0 / NET.speed(1.0);
        let r = simulate_day(&[0.0, solo + 1.0], &[4600.0, 4600.0], &NET).unwrap();
        assert!((r.travel_times[0] - solo).abs() < 1e-9);
        assert!((r.travel_times[1] - solo).abs() < 1e-9);
        assert_eq!(r.peak_accumulation, 1);
    }

    #[test]
    fn departure_at_an_arrival_instant_goes_first() {
        let tt = 4600.0 / NET.speed(1.0);
        let r = simulate_day(&[0.0, tt], &[4600.0, 4600.0], &NET).unwrap();
        assert_eq!(r.peak_accumulation, 2);
        assert!((r.travel_times[0] - tt).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(simulate_day(&[0.0], &[0.0], &NET), Err(Error::Input(_))));
        assert!(matches!(simulate_day(&[f64::NAN], &[10.0], &NET), Err(Error::Input(_))));
        assert!(matches!(simulate_day(&[0.0], &[1.0, 2.0], &NET), Err(Error::Input(_))));
    }

    #[test]
    fn gridlock_is_reported_as_stall() {
        let net = NetworkParams { n_jam: 3.0, v_f: 10.0 };
        let err = simulate_day(&[0.0, 0.0, 0.0, 1.0], &[1e6; 4], &net).unwrap_err();
        match err {
            Error::Stall { time, inside } => {
                assert_eq!(time, 0.0);
                assert_eq!(inside, 3);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn empty_day_is_empty() {
        let r = simulate_day(&[], &[], &NET).unwrap();
        assert!(r.trajectory.is_empty());
        assert!((probe_travel_time(&r, 5.0, 586.8, &NET) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probe_through_empty_network_is_free_flow() {
        let r = simulate_day(&[0.0], &[4600.0], &NET).unwrap();
        let later = r.trajectory[1].time + 10.0;
        assert!((probe_travel_time(&r, later, 4600.0, &NET) - 4600.0 / 586.8).abs() < 1e-12);
        assert!((probe_travel_time(&r, -50.0, 4600.0, &NET) - 4600.0 / 586.8).abs() < 1e-12);
        assert_eq!(probe_travel_time(&r, 0.0, 0.0, &NET), 0.0);
        assert!(probe_travel_time(&r, 0.0, 1e-9, &NET) < 1e-9);
    }

    #[test]
    fn probe_splits_distance_across_phases() {
        // Two vehicles in the network for exactly five minutes, then empty.
        let v2 = NET.speed(2.0);
        let v0 = NET.speed(0.0);
        let result = DaySimResult {
            travel_times: vec![5.0, 5.0],
            trajectory: vec![
                TrajectoryPoint { time: 0.0, accumulation: 1 },
                TrajectoryPoint { time: 0.0, accumulation: 2 },
                TrajectoryPoint { time: 5.0, accumulation: 1 },
                TrajectoryPoint { time: 5.0, accumulation: 0 },
            ],
            peak_accumulation: 2,
        };
        // Leave at minute 1: four minutes at V(2), then the rest at V(0).
        let length = 4.0 * v2 + 300.0;
        let expected = 4.0 + 300.0 / v0;
        assert!((probe_travel_time(&result, 1.0, length, &NET) - expected).abs() < 1e-12);
        // Entirely inside the congested phase.
        assert!((probe_travel_time(&result, 1.0, 2.0 * v2, &NET) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_csv_format() {
        let r = simulate_day(&[0.0], &[586.8], &NET).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&r.trajectory, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("event_time_min,accumulation\n0,1\n"));
    }
}
