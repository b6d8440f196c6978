//! Per-capita social welfare at equilibrium.

use serde::{Deserialize, Serialize};

use crate::dynamics::{experienced_cost, time_cost, toll_payment, EquilibriumResult};
use crate::population::TravelerProfile;
use crate::toll::TollProfile;
use crate::{Error, Result};

/// Tolerance on the CS + RR = -theta * tc identity, DKK.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub welfare_per_capita: f64,
    pub consumer_surplus_per_capita: f64,
    pub revenue_per_capita: f64,
    /// Mean of theta * T, DKK (positive cost).
    pub avg_travel_time_cost: f64,
    /// Mean of theta * schedule delay, DKK (positive cost).
    pub avg_schedule_delay_cost: f64,
    pub include_epsilon: bool,
}

fn check_shapes(eq: &EquilibriumResult, population: &[TravelerProfile]) -> Result<()> {
    if eq.final_slots.len() != population.len() || eq.final_day.travel_times.len() != population.len() {
        return Err(Error::Misuse(format!(
            "equilibrium covers {} travelers, population has {}",
            eq.final_slots.len(),
            population.len()
        )));
    }
    Ok(())
}

fn epsilon_mean(eq: &EquilibriumResult, include: bool) -> f64 {
    if !include || eq.final_slots.is_empty() {
        return 0.0;
    }
    let s: f64 = eq
        .final_slots
        .iter()
        .enumerate()
        .map(|(i, &k)| eq.gumbel_draws[i][k])
        .sum();
    s / eq.final_slots.len() as f64
}

/// Mean travel-time and schedule-delay costs (positive DKK) at the chosen departures.
pub fn cost_components(eq: &EquilibriumResult, population: &[TravelerProfile]) -> Result<(f64, f64)> {
    check_shapes(eq, population)?;
    let n = population.len().max(1) as f64;
    let (mut tt, mut sd) = (0.0, 0.0);
    for (p, &k) in population.iter().zip(&eq.final_slots) {
        let c = time_cost(p, p.time_window[k], eq.final_day.travel_times[p.id]);
        tt += p.value_of_time * c.travel;
        sd += p.value_of_time * c.schedule;
    }
    Ok((tt / n, sd / n))
}

/// Welfare of a no-toll equilibrium.
pub fn welfare_nte(eq: &EquilibriumResult, population: &[TravelerProfile], include_epsilon: bool) -> Result<WelfareReport> {
    if eq.toll.as_ref().is_some_and(|t| !t.is_zero()) {
        return Err(Error::Misuse("welfare_nte called on a tolled equilibrium".into()));
    }
    let (tt, sd) = cost_components(eq, population)?;
    let w = -(tt + sd) + epsilon_mean(eq, include_epsilon);
    Ok(WelfareReport {
        welfare_per_capita: w,
        consumer_surplus_per_capita: w,
        revenue_per_capita: 0.0,
        avg_travel_time_cost: tt,
        avg_schedule_delay_cost: sd,
        include_epsilon,
    })
}

/// Welfare of a tolled equilibrium split into consumer surplus and revenue.
/// The toll cancels in the sum; both routes are computed and must agree, and
/// the reported total is the toll-free one so a zero toll reproduces the
/// no-toll figure bit for bit.
pub fn welfare_todp(
    eq: &EquilibriumResult,
    population: &[TravelerProfile],
    toll: &TollProfile,
    w: f64,
    include_epsilon: bool,
) -> Result<WelfareReport> {
    match &eq.toll {
        Some(t) if t == toll => {}
        _ => return Err(Error::Misuse("equilibrium was not computed under this toll".into())),
    }
    if eq.toll_scale != w {
        return Err(Error::Misuse(format!(
            "toll scale {w} differs from the equilibrium's {}",
            eq.toll_scale
        )));
    }
    let (tt, sd) = cost_components(eq, population)?;
    let n = population.len().max(1) as f64;
    let (mut cs, mut rr) = (0.0, 0.0);
    for (p, &k) in population.iter().zip(&eq.final_slots) {
        let dep = p.time_window[k];
        cs += experienced_cost(p, dep, eq.final_day.travel_times[p.id], Some(toll), w);
        rr += toll_payment(p, dep, Some(toll), w);
    }
    let eps = epsilon_mean(eq, include_epsilon);
    let cs = cs / n + eps;
    let rr = rr / n;
    let direct = -(tt + sd) + eps;
    let scale = direct.abs().max(1.0);
    if ((cs + rr) - direct).abs() > IDENTITY_TOL * scale {
        return Err(Error::Numerical(format!(
            "CS + RR = {} disagrees with the time-cost welfare {direct}",
            cs + rr
        )));
    }
    Ok(WelfareReport {
        welfare_per_capita: direct,
        consumer_surplus_per_capita: cs,
        revenue_per_capita: rr,
        avg_travel_time_cost: tt,
        avg_schedule_delay_cost: sd,
        include_epsilon,
    })
}

/// Dispatches on whether the equilibrium was tolled.
pub fn welfare(eq: &EquilibriumResult, population: &[TravelerProfile], include_epsilon: bool) -> Result<WelfareReport> {
    match &eq.toll {
        Some(t) => welfare_todp(eq, population, t, eq.toll_scale, include_epsilon),
        None => welfare_nte(eq, population, include_epsilon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::CostTable;
    use crate::mfd::{DaySimResult, TrajectoryPoint};

    fn traveler(id: usize, t_star: f64, length: f64) -> TravelerProfile {
        TravelerProfile {
            id,
            trip_length: length,
            value_of_time: 1.1,
            sde: 0.5,
            sdl: 4.0,
            desired_arrival: t_star,
            time_window: vec![60.0, 70.0, 80.0, 90.0],
        }
    }

    fn equilibrium(slots: Vec<usize>, tts: Vec<f64>, toll: Option<TollProfile>) -> EquilibriumResult {
        let n = slots.len();
        EquilibriumResult {
            final_costs: CostTable { perceived: vec![vec![0.0; 4]; n], experienced: vec![vec![0.0; 4]; n] },
            final_departures: vec![],
            final_day: DaySimResult {
                travel_times: tts,
                trajectory: vec![TrajectoryPoint { time: 0.0, accumulation: 0 }],
                peak_accumulation: n,
            },
            final_slots: slots,
            inconsistency_series: vec![],
            day_results: vec![],
            converged: true,
            days_run: 1,
            gumbel_draws: vec![vec![1.0, 2.0, 3.0, 4.0]; n],
            toll,
            toll_scale: 2e-4,
            trajectories: vec![],
        }
    }

    #[test]
    fn on_time_travelers_only_pay_travel_time() {
        let pop = vec![traveler(0, 100.0, 4600.0), traveler(1, 90.0, 4600.0)];
        let eq = equilibrium(vec![3, 2], vec![10.0, 10.0], None);
        let r = welfare_nte(&eq, &pop, false).unwrap();
        assert!((r.welfare_per_capita + 11.0).abs() < 1e-12);
        assert_eq!(r.avg_schedule_delay_cost, 0.0);
        assert_eq!(r.revenue_per_capita, 0.0);
        let with_eps = welfare_nte(&eq, &pop, true).unwrap();
        assert!((with_eps.welfare_per_capita - (-11.0 + 3.5)).abs() < 1e-12);
    }

    #[test]
    fn cs_plus_rr_matches_hand_computation() {
        let pop = vec![traveler(0, 100.0, 4600.0), traveler(1, 95.0, 3000.0)];
        let toll = TollProfile::single(11.0, 80.0, 18.0).unwrap();
        let eq = equilibrium(vec![2, 1], vec![12.0, 30.0], Some(toll.clone()));
        let r = welfare_todp(&eq, &pop, &toll, 2e-4, false).unwrap();
        // Traveler 0: dep 80, arrive 92, 8 early. tc = 12 + 0.5*8 = 16; toll 11*4600*2e-4.
        // Traveler 1: dep 70, arrive 100, 5 late. tc = 30 + 4*5 = 50; toll at 70.
        let toll0 = 11.0 * 4600.0 * 2e-4;
        let toll1 = 11.0 * (-(10.0f64 / 18.0).powi(2) / 2.0).exp() * 3000.0 * 2e-4;
        let cs = (-1.1 * 16.0 - toll0 + -1.1 * 50.0 - toll1) / 2.0;
        let rr = (toll0 + toll1) / 2.0;
        assert!((r.consumer_surplus_per_capita - cs).abs() < 1e-12);
        assert!((r.revenue_per_capita - rr).abs() < 1e-12);
        assert!((r.welfare_per_capita - (-1.1 * 66.0 / 2.0)).abs() < 1e-12);
        assert!((r.avg_travel_time_cost - 1.1 * 21.0).abs() < 1e-12);
        assert!((r.avg_schedule_delay_cost - 1.1 * 12.0).abs() < 1e-12);
    }

    #[test]
    fn zero_toll_matches_nte() {
        let pop = vec![traveler(0, 100.0, 4600.0)];
        let zero = TollProfile::single(0.0, 80.0, 18.0).unwrap();
        let eq = equilibrium(vec![1], vec![15.0], Some(zero.clone()));
        let a = welfare_todp(&eq, &pop, &zero, 2e-4, false).unwrap();
        let b = welfare_nte(&eq, &pop, false).unwrap();
        assert!((a.welfare_per_capita - b.welfare_per_capita).abs() < 1e-12);
        assert_eq!(a.revenue_per_capita, 0.0);
    }

    #[test]
    fn misuse_is_rejected() {
        let pop = vec![traveler(0, 100.0, 4600.0)];
        let toll = TollProfile::single(11.0, 80.0, 18.0).unwrap();
        let tolled = equilibrium(vec![1], vec![15.0], Some(toll.clone()));
        assert!(matches!(welfare_nte(&tolled, &pop, false), Err(Error::Misuse(_))));
        let other = TollProfile::single(12.0, 80.0, 18.0).unwrap();
        assert!(matches!(welfare_todp(&tolled, &pop, &other, 2e-4, false), Err(Error::Misuse(_))));
        assert!(matches!(welfare_todp(&tolled, &pop, &toll, 1e-4, false), Err(Error::Misuse(_))));
        let untolled = equilibrium(vec![1], vec![15.0], None);
        assert!(matches!(welfare_todp(&untolled, &pop, &toll, 2e-4, false), Err(Error::Misuse(_))));
    }
}
