use rand::Rng as _;
use thermosched_core::ctmc::{Distribution, NoiseSchedule, RateKernel, SequenceSpace};
use thermosched_core::experiments::binomial_pmf;
use thermosched_core::rng::{self, domain};
use thermosched_core::score::OracleScore;
use thermosched_core::thermo::{
    corrupted_batch, h_na_estimate, time_grid, wasserstein_bound, DataSource, EntropyCurve, ExactChain,
    WassersteinMode,
};
use thermosched_core::Error;

fn random_chain(rng: &mut rng::Rng, kernel_of: fn(usize) -> RateKernel) -> ExactChain {
    let vocab = rng.random_range(2..=5);
    let length = rng.random_range(1..=3);
    let space = SequenceSpace::new(kernel_of(vocab), length).unwrap();
    let mut w: Vec<f64> = (0..vocab.pow(length as u32)).map(|_| rng.random::<f64>()).collect();
    // Sparse data distributions exercise zero-mass states.
    for v in w.iter_mut() {
        if rng.random::<f64>() < 0.3 {
            *v = 0.0;
        }
    }
    w[0] += 0.1;
    let seqs = (0..w.len()).map(|i| {
        let mut s = Vec::with_capacity(length);
        let mut r = i;
        for _ in 0..length {
            s.push(r % vocab);
            r /= vocab;
        }
        s
    });
    let p0 = space.lift(seqs.zip(w)).unwrap();
    ExactChain::new(space, NoiseSchedule::toy_default(), p0).unwrap()
}

#[test]
fn exact_nonadiabatic_rate_is_nonnegative() {
    let mut rng = rng::stream(21, domain::EXPERIMENT, 0);
    let makers: [fn(usize) -> RateKernel; 2] = [|n| RateKernel::uniform(n).unwrap(), |n| RateKernel::absorbing(n).unwrap()];
    for make in makers {
        for _ in 0..30 {
            let chain = random_chain(&mut rng, make);
            for t in [1e-5, 0.1, 0.4, 0.7, 1.0] {
                let r = chain.rates(t).unwrap();
                assert!(r.h_na >= -1e-12, "{} t={t}: {}", chain.kernel().name(), r.h_na);
                assert!(r.activity >= 0.0 && r.mobility >= 0.0);
            }
        }
    }
}

#[test]
fn decomposition_wherever_finite() {
    let mut rng = rng::stream(22, domain::EXPERIMENT, 0);
    for _ in 0..30 {
        let chain = random_chain(&mut rng, |n| RateKernel::uniform(n).unwrap());
        let t = rng.random_range(0.01..1.0);
        let r = chain.rates(t).unwrap();
        if let (Some(tot), Some(ad)) = (r.h_tot.finite(), r.h_ad.finite()) {
            assert!((tot - ad - r.h_na).abs() < 1e-8);
        }
    }
}

#[test]
fn estimator_error_shrinks_as_inverse_sqrt_n() {
    let noise = NoiseSchedule::toy_default();
    let p0 = binomial_pmf(14, 0.5);
    let kernel = RateKernel::uniform(15).unwrap();
    let oracle = OracleScore::single(kernel, noise, &p0).unwrap();
    let t = 0.5;
    let replicates = 300;
    let sizes = [64usize, 128, 256, 512, 1024];
    let stds: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let est: Vec<f64> = (0..replicates)
                .map(|r| {
                    let mut rng = rng::stream(n as u64, domain::ESTIMATE, r);
                    let batch = corrupted_batch(kernel, &noise, DataSource::Token(&p0), t, n, &mut rng);
                    h_na_estimate(&oracle, &noise, t, &batch).unwrap().h_na
                })
                .collect();
            let mean = est.iter().sum::<f64>() / est.len() as f64;
            (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt()
        })
        .collect();
    for w in stds.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.25, "per-doubling ratio {ratio}, stds {stds:?}");
    }
    let overall = stds[0] / stds[4];
    assert!((overall / 4.0 - 1.0).abs() < 0.25, "four doublings: {overall}");
}

#[test]
fn mobility_bound_lies_below_activity_bound() {
    let mut rng = rng::stream(23, domain::EXPERIMENT, 0);
    let grid = time_grid(64).unwrap();
    for _ in 0..10 {
        let chain = random_chain(&mut rng, |n| RateKernel::uniform(n).unwrap());
        let curve = EntropyCurve::exact(&chain, &grid).unwrap();
        let mob = wasserstein_bound(&curve, WassersteinMode::MobilityTotal).unwrap();
        let act = wasserstein_bound(&curve, WassersteinMode::ActivityTotal).unwrap();
        for (m, a) in mob.rate.iter().zip(&act.rate) {
            assert!(*m <= a * (1.0 + 1e-12) + 1e-15);
        }
    }
}

#[test]
fn total_entropy_bounds_refuse_absorbing_curves() {
    let p0 = Distribution::new(vec![0.3, 0.7]).unwrap();
    let chain = ExactChain::single(RateKernel::absorbing(2).unwrap(), NoiseSchedule::toy_default(), &p0).unwrap();
    let curve = EntropyCurve::exact(&chain, &time_grid(16).unwrap()).unwrap();
    for mode in [WassersteinMode::ActivityTotal, WassersteinMode::MobilityTotal] {
        assert!(matches!(wasserstein_bound(&curve, mode), Err(Error::Config(_))));
    }
    assert!(wasserstein_bound(&curve, WassersteinMode::ActivityNonadiabatic).unwrap().total() > 0.0);
}
