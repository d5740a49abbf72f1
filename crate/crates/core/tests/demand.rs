use phev_demand::demand::{
    expected_demand_curve, moment_match, monte_carlo_demand_oracle, wrapped_arrival_pmf, ArrivalTimeDist,
    ChargingFamily, ChargingTimeDist, EmpiricalPmf,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn charging_strategy() -> impl Strategy<Value = ChargingTimeDist> {
    prop_oneof![
        (0.1f64..8.0, 0.5f64..12.0).prop_map(|(a, w)| ChargingTimeDist::uniform(a, a + w).unwrap()),
        (0.5f64..10.0, 0.3f64..3.0).prop_map(|(m, s)| ChargingTimeDist::truncated_gaussian(m, s).unwrap()),
        (0.0f64..8.0, 0.3f64..2.5).prop_map(|(n, s)| ChargingTimeDist::rician(n, s).unwrap()),
        (1usize..6, any::<u64>()).prop_map(|(bins, seed)| {
            let edges: Vec<f64> = (0..=bins).map(|k| 1.0 + 2.0 * k as f64).collect();
            let raw: Vec<f64> = (0..bins).map(|k| 1.0 + ((seed >> (8 * k)) & 0xff) as f64).collect();
            let total: f64 = raw.iter().sum();
            let mut masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
            let head: f64 = masses[..bins - 1].iter().sum();
            masses[bins - 1] = 1.0 - head;
            ChargingTimeDist::empirical(EmpiricalPmf::new(edges, masses).unwrap()).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn survival_is_monotone_and_bounded(d in charging_strategy()) {
        let mut prev = d.survival(0.0);
        prop_assert!((0.0..=1.0).contains(&prev));
        for k in 1..=240 {
            let s = d.survival(k as f64 * 0.1);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev + 1e-12, "u={} {} > {}", k as f64 * 0.1, s, prev);
            prev = s;
        }
    }

    #[test]
    fn curve_energy_is_power_times_mean_duration(
        mu in 0.0f64..24.0,
        var in 0.3f64..30.0,
        power in 0.5f64..7.0,
        d in charging_strategy(),
    ) {
        let arrival = ArrivalTimeDist::new(mu, var).unwrap();
        let curve = expected_demand_curve(&arrival, &d, power, 96).unwrap();
        let expected = power * d.mean();
        prop_assert!((curve.energy() - expected).abs() <= 1e-6 * expected);
        prop_assert!(curve.values().iter().all(|&v| (0.0..=power).contains(&v)));
    }

    #[test]
    fn shifting_arrival_rotates_curve(mu in 0.0f64..24.0, var in 0.5f64..15.0, k in 1usize..96) {
        let d = ChargingTimeDist::uniform(1.0, 11.0).unwrap();
        let base = expected_demand_curve(&ArrivalTimeDist::new(mu, var).unwrap(), &d, 2.0, 96).unwrap();
        let shifted_mu = (mu + 0.25 * k as f64).rem_euclid(24.0);
        let shifted = expected_demand_curve(&ArrivalTimeDist::new(shifted_mu, var).unwrap(), &d, 2.0, 96).unwrap();
        for i in 0..96 {
            let a = base.values()[i];
            let b = shifted.values()[(i + k) % 96];
            prop_assert!((a - b).abs() < 1e-9, "slot {}: {} vs {}", i, a, b);
        }
    }

    #[test]
    fn arrival_pmf_sums_to_one(mu in 0.0f64..24.0, var in 1e-6f64..200.0, slots in 4usize..200) {
        let pmf = wrapped_arrival_pmf(&ArrivalTimeDist::new(mu, var).unwrap(), slots).unwrap();
        prop_assert_eq!(pmf.len(), slots);
        prop_assert!(pmf.iter().all(|&p| p >= 0.0));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

fn sample_moments(d: &ChargingTimeDist, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}

#[test]
fn moment_matched_parameters_agree_with_reference_solver() {
    // values from an independent root-finder run on scipy's truncnorm and rice
    let tg = moment_match(ChargingFamily::TruncatedGaussian, 6.0, 25.0 / 3.0).unwrap();
    let ChargingTimeDist::TruncatedGaussian { mu, sigma } = tg else { panic!() };
    assert!((mu - 5.76726).abs() < 1e-4 && (sigma - 3.11926).abs() < 1e-4, "{mu} {sigma}");

    let ri = moment_match(ChargingFamily::Rician, 6.0, 25.0 / 3.0).unwrap();
    let ChargingTimeDist::Rician { nu, sigma } = ri else { panic!() };
    assert!((nu - 4.41689).abs() < 1e-4 && (sigma - 3.52309).abs() < 1e-4, "{nu} {sigma}");
}

#[test]
fn moment_matched_draws_have_target_moments() {
    let n = 1_000_000;
    for (family, seed) in [(ChargingFamily::TruncatedGaussian, 5), (ChargingFamily::Rician, 6)] {
        let d = moment_match(family, 6.0, 25.0 / 3.0).unwrap();
        let (m, v) = sample_moments(&d, n, seed);
        // standard errors: sqrt(var / n) for the mean, roughly var·sqrt(2 / n) for the variance
        let se_mean = (25.0 / 3.0 / n as f64).sqrt();
        let se_var = 25.0 / 3.0 * (3.0 / n as f64).sqrt();
        assert!((m - 6.0).abs() < 5.0 * se_mean, "{family}: mean {m}");
        assert!((v - 25.0 / 3.0).abs() < 5.0 * se_var, "{family}: var {v}");
    }
}

#[test]
fn reference_curve_peaks_after_the_arrival_mean() {
    let curve = expected_demand_curve(
        &ArrivalTimeDist::reference(),
        &ChargingTimeDist::uniform(1.0, 11.0).unwrap(),
        2.0,
        96,
    )
    .unwrap();
    let (peak, _) = curve
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    // arrivals centre on 19 h and sessions last hours, so the peak lands late evening
    assert!((76..96).contains(&peak), "peak slot {peak}");
}

#[test]
fn analytic_curve_sits_inside_monte_carlo_band() {
    let arrival = ArrivalTimeDist::reference();
    let charging = ChargingTimeDist::empirical(EmpiricalPmf::default_non_uniform()).unwrap();
    let analytic = expected_demand_curve(&arrival, &charging, 2.0, 96).unwrap();
    let mc = monte_carlo_demand_oracle(&arrival, &charging, 2.0, 96, 200_000, 21).unwrap();
    let inside = (0..96)
        .filter(|&i| (analytic.values()[i] - mc.curve.values()[i]).abs() <= 3.0 * mc.std_error[i] + 1e-12)
        .count();
    assert!(inside >= 91, "{inside}/96 slots within 3 SE");
}
