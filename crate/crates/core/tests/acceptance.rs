//! Acceptance criteria. Prints one PASS/FAIL line per criterion, with the
//! failing sub-checks listed under it, and exits nonzero if any criterion fails.

mod support;

use std::process::ExitCode;

use nalgebra::DVector;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swd_core::approx::ApproxConstants;
use swd_core::optimal::{a_inv_ones, a_inv_z, optimal_p_equal_case};
use swd_core::search::{mirror_representative, rank_distinct};
use swd_core::*;

struct Criterion {
    id: u32,
    title: &'static str,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.check(
            format!("{label}: got {got:.7}, want {want} +/- {tol:e}"),
            ok,
        );
    }

    fn report(self) -> bool {
        let failed: Vec<&(String, bool)> = self.checks.iter().filter(|c| !c.1).collect();
        let ok = failed.is_empty();
        println!(
            "{} [{}] {} ({}/{} checks)",
            if ok { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.checks.len() - failed.len(),
            self.checks.len()
        );
        for (label, _) in failed {
            println!("       failed: {label}");
        }
        ok
    }
}

fn rrt() -> ClusterSet {
    ClusterSet::new(vec![6, 6, 6, 4, 4, 2]).unwrap()
}

fn rrt_config(lambda: f64) -> TrialConfig {
    TrialConfig::cross_sectional(4, lambda).unwrap()
}

fn ten_clusters() -> ClusterSet {
    ClusterSet::new(vec![20, 20, 20, 20, 10, 10, 10, 10]).unwrap()
}

fn canon(s: &str) -> CanonicalAllocation {
    s.parse().unwrap()
}

fn approx_value(config: &TrialConfig, clusters: &ClusterSet, alloc: &str) -> f64 {
    let model = ApproxModel::new(config, clusters).unwrap();
    let profile = AllocationProfile::from_canonical(config, clusters, &canon(alloc));
    model.evaluate(&profile).total()
}

fn criterion_1() -> bool {
    let mut c = Criterion::new(1, "RRT regression weights");
    for (lambda, w, beta, wb) in [
        (9.0, 0.1710, 1.2644, 0.2162),
        (19.0, 0.1276, 1.3774, 0.1758),
    ] {
        let fit = fit_regression(&rrt_config(lambda), &rrt());
        c.near(&format!("lambda={lambda} W"), fit.w, w, 5e-5);
        c.near(&format!("lambda={lambda} beta"), fit.beta, beta, 5e-5);
        c.near(&format!("lambda={lambda} W beta"), fit.w_beta(), wb, 5e-5);
    }
    c.report()
}

/// Least-squares slope of `q` on `W p` in exact rational arithmetic.
fn rational_fit(sizes: &[i128], lambda: i128, periods: i128) -> (Ratio<i128>, Ratio<i128>) {
    let n: i128 = sizes.iter().sum();
    let c = Ratio::from_integer(sizes.len() as i128);
    let p: Vec<Ratio<i128>> = sizes.iter().map(|&s| Ratio::new(s, n)).collect();
    let q: Vec<Ratio<i128>> = sizes
        .iter()
        .zip(&p)
        .map(|(&s, &pi)| pi * Ratio::new(s, lambda + periods * s))
        .collect();
    let w: Ratio<i128> = q.iter().copied().sum();
    let x: Vec<Ratio<i128>> = p.iter().map(|&pi| w * pi).collect();
    let mx = x.iter().copied().sum::<Ratio<i128>>() / c;
    let mq = w / c;
    let sxy: Ratio<i128> = x.iter().zip(&q).map(|(&a, &b)| (a - mx) * (b - mq)).sum();
    let sxx: Ratio<i128> = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    (w, sxy / sxx)
}

fn criterion_2() -> bool {
    let mut c = Criterion::new(2, "Ten-cluster artificial example and lambda sweep");
    let (w_r, beta_r) = rational_fit(&[20, 20, 20, 20, 10, 10, 10, 10], 50, 5);
    c.check(
        format!("rational W = {w_r}, beta = {beta_r}"),
        w_r == Ratio::new(11, 90) && beta_r == Ratio::new(15, 11),
    );
    let fit = fit_regression(
        &TrialConfig::cross_sectional(5, 50.0).unwrap(),
        &ten_clusters(),
    );
    c.near("floating W vs 11/90", fit.w, 11.0 / 90.0, 1e-15);
    c.near("floating beta vs 15/11", fit.beta, 15.0 / 11.0, 1e-14);

    let d1 = "20,20;10,10;10,10;20,20";
    let d2 = "20,10,10;20;20;20,10,10";
    let rows = [
        (0.5, 0.380, 0.380, -0.001),
        (5.0, 0.394, 0.399, -0.012),
        (50.0, 0.486, 0.508, -0.044),
        (500.0, 0.643, 0.653, -0.020),
        (5000.0, 0.688, 0.690, -0.0003),
    ];
    for (lambda, v1, v2, coef) in rows {
        let config = TrialConfig::cross_sectional(5, lambda).unwrap();
        c.near(
            &format!("lambda={lambda} V_D1"),
            approx_value(&config, &ten_clusters(), d1),
            v1,
            1e-3,
        );
        c.near(
            &format!("lambda={lambda} V_D2"),
            approx_value(&config, &ten_clusters(), d2),
            v2,
            1e-3,
        );
        let fit = fit_regression(&config, &ten_clusters());
        c.near(
            &format!("lambda={lambda} W(1-beta)"),
            fit.w * (1.0 - fit.beta),
            coef,
            5e-4,
        );
    }
    c.report()
}

/// One published RRT row: allocation, V, distance, 28P, 6K and the four terms.
struct Row {
    alloc: &'static str,
    v: f64,
    distance: f64,
    p28: [f64; 3],
    k6: [f64; 3],
    terms: [f64; 4],
}

fn match_row(c: &mut Criterion, rank: usize, got: &RankedAllocation, row: &Row) {
    let want = canon(row.alloc);
    let flipped = got.allocation == want.mirror() && got.allocation != want;
    c.check(
        format!(
            "rank {rank}: {} is {} or its mirror",
            got.allocation, row.alloc
        ),
        got.allocation == want || flipped,
    );
    let orient = |v: &DVector<f64>, scale: f64| -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().map(|x| x * scale).collect();
        if flipped {
            out.reverse();
        }
        out
    };
    let tag = format!("rank {rank} ({})", row.alloc);
    c.near(&format!("{tag} V"), got.v_approx, row.v, 1e-3);
    c.near(&format!("{tag} distance"), got.distance, row.distance, 1e-3);
    for (i, (g, w)) in orient(&got.p, 28.0).iter().zip(&row.p28).enumerate() {
        c.near(&format!("{tag} 28P[{i}]"), *g, *w, 1e-3);
    }
    for (i, (g, w)) in orient(&got.k, 6.0).iter().zip(&row.k6).enumerate() {
        c.near(&format!("{tag} 6K[{i}]"), *g, *w, 1e-3);
    }
    let t = got.terms;
    let names = ["P'AP", "h1 b z'P", "-h2 b^2", "-W(1-beta)a"];
    for ((name, g), w) in names
        .iter()
        .zip([t.quadratic, t.linear, t.imbalance_penalty, t.outer_loading])
        .zip(row.terms)
    {
        c.near(&format!("{tag} {name}"), g, w, 1e-3);
    }
}

fn criterion_3() -> bool {
    let mut c = Criterion::new(
        3,
        "RRT enumeration, ranked rows and cluster-balanced optima",
    );
    let clusters = rrt();
    let all = swd_core::search::canonical_allocations(&clusters, 3, u128::MAX).unwrap();
    c.check(
        format!("{} canonical allocations, want 180", all.len()),
        all.len() == 180,
    );

    let scheme = SearchScheme::exhaustive();
    let ranked9 = enumerate(&clusters, &rrt_config(9.0), &scheme).unwrap();
    c.check(
        format!("{} estimable, want 177", ranked9.len()),
        ranked9.len() == 177,
    );
    c.check(
        format!("lambda=9 top is {}", ranked9[0].allocation),
        ranked9[0].allocation == canon("4,4,2;6;6,6"),
    );
    c.near("lambda=9 maximum V", ranked9[0].v_approx, 0.343, 1e-3);

    let dedup = SearchScheme {
        mirror_dedup: true,
        ..SearchScheme::exhaustive()
    };
    let rows19 = [
        Row {
            alloc: "6,4,2;4;6,6",
            v: 0.379,
            distance: 0.042,
            p28: [12.0, 4.0, 12.0],
            k6: [3.0, 1.0, 2.0],
            terms: [0.339, 0.0, -0.0005, 0.040],
        },
        Row {
            alloc: "4,4,2;6;6,6",
            v: 0.378,
            distance: 0.061,
            p28: [10.0, 6.0, 12.0],
            k6: [3.0, 1.0, 2.0],
            terms: [0.337, 0.0007, -0.0005, 0.040],
        },
        Row {
            alloc: "6,4,2;6;6,4",
            v: 0.376,
            distance: 0.078,
            p28: [12.0, 6.0, 10.0],
            k6: [3.0, 1.0, 2.0],
            terms: [0.337, -0.0007, -0.0005, 0.040],
        },
        Row {
            alloc: "6,6,2;;6,4,4",
            v: 0.372,
            distance: 0.215,
            p28: [14.0, 0.0, 14.0],
            k6: [3.0, 0.0, 3.0],
            terms: [0.324, 0.0, 0.0, 0.048],
        },
    ];
    let ranked19 = enumerate(&clusters, &rrt_config(19.0), &dedup).unwrap();
    for (i, row) in rows19.iter().enumerate() {
        match_row(&mut c, i + 5, &ranked19[i], row);
    }

    let rows9 = [Row {
        alloc: "4,4,2;6;6,6",
        v: 0.343,
        distance: 0.042,
        p28: [10.0, 6.0, 12.0],
        k6: [3.0, 1.0, 2.0],
        terms: [0.306, 0.0005, -0.0007, 0.038],
    }];
    let ranked9d = enumerate(&clusters, &rrt_config(9.0), &dedup).unwrap();
    match_row(&mut c, 1, &ranked9d[0], &rows9[0]);

    let balanced = SearchScheme::random(SearchMode::RandomClusterBalanced, 2000, 20240601);
    for (lambda, best, bound) in [(9.0, 0.3360, 0.3373), (19.0, 0.3695, 0.3717)] {
        let config = rrt_config(lambda);
        let distinct = rank_distinct(sample(&clusters, &config, &balanced).unwrap());
        c.check(
            format!(
                "lambda={lambda}: {} distinct cluster-balanced allocations, want 15",
                distinct.len()
            ),
            distinct.len() == 15,
        );
        c.near(
            &format!("lambda={lambda} best cluster-balanced V"),
            distinct[0].v_approx,
            best,
            5e-4,
        );
        let fit = fit_regression(&config, &clusters);
        let v9 = optimal_value_formula(&fit, 3, 2.0 / 3.0, 0.0).unwrap();
        c.near(&format!("lambda={lambda} balanced bound"), v9, bound, 5e-4);
        if lambda == 9.0 {
            let top = distinct[0].allocation.clone();
            c.check(
                format!("lambda=9 best cluster-balanced is {top}"),
                top == canon("6,4;4,2;6,6") || top == canon("6,6;4,2;6,4"),
            );
        }
    }
    c.report()
}

fn criterion_4() -> bool {
    let mut c = Criterion::new(4, "Optimal individual allocations");
    let balanced = DVector::from_element(3, 1.0 / 3.0);
    for (lambda, want) in [(9.0, [0.39, 0.22, 0.39]), (19.0, [0.41, 0.18, 0.41])] {
        let model = ApproxModel::new(&rrt_config(lambda), &rrt()).unwrap();
        let opt = optimal_p(&model.constants, &model.geometry, &balanced);
        for (i, w) in want.iter().enumerate() {
            c.near(
                &format!("lambda={lambda} P_opt[{i}]"),
                opt.p_opt[i],
                *w,
                5e-3,
            );
        }
    }
    let model = ApproxModel::new(&rrt_config(9.0), &rrt()).unwrap();
    let k = DVector::from_vec(vec![3.0, 1.0, 2.0]) / 6.0;
    let opt = optimal_p(&model.constants, &model.geometry, &k);
    for (i, w) in [0.386, 0.216, 0.398].iter().enumerate() {
        c.near(&format!("K=(3,1,2)/6 P_opt[{i}]"), opt.p_opt[i], *w, 5e-4);
    }

    // supplied summary values for a 22-cluster trial dealt 6, 5, 5, 6
    let fit = RegressionFit {
        w: 0.1816,
        beta: 1.0900,
        alpha: 0.0,
        residuals: Vec::new(),
        corr: 1.0,
    };
    let geometry = build_geometry(4).unwrap();
    let constants = ApproxConstants::new(&fit, &geometry).unwrap();
    let k = DVector::from_vec(vec![6.0, 5.0, 5.0, 6.0]) / 22.0;
    let opt = optimal_p(&constants, &geometry, &k);
    for (i, w) in [0.302, 0.198, 0.198, 0.302].iter().enumerate() {
        c.near(
            &format!("supplied W, beta P_opt[{i}]"),
            opt.p_opt[i],
            *w,
            5e-4,
        );
    }
    let a = k.dot(&geometry.y);
    c.near("a for 6,5,5,6 clusters", a, 59.0 / 44.0, 1e-15);
    let v = optimal_value_formula(&fit, 4, a, 0.0).unwrap();
    c.near("supplied W, beta optimum value", v, 0.4048342, 1e-6);
    c.report()
}

fn criterion_5() -> bool {
    let mut c = Criterion::new(5, "Approximation accuracy over all RRT allocations");
    let clusters = rrt();
    for (lambda, max_all, max_over) in [(9.0, 0.015, 2usize), (19.0, 0.02, 4)] {
        let config = rrt_config(lambda);
        let mut errors = Vec::new();
        for alloc in swd_core::search::canonical_allocations(&clusters, 3, u128::MAX).unwrap() {
            if alloc.occupied() < 2 {
                continue;
            }
            let a = alloc.to_allocation(&clusters).unwrap();
            errors.push((alloc, approximation_error(&config, &clusters, &a).unwrap()));
        }
        c.check(
            format!("lambda={lambda}: {} estimable", errors.len()),
            errors.len() == 177,
        );
        let over: Vec<&(CanonicalAllocation, f64)> = errors.iter().filter(|e| e.1 > 0.01).collect();
        let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
        c.check(
            format!("lambda={lambda}: worst discrepancy {worst:.5}, want <= {max_all}"),
            worst <= max_all,
        );
        if lambda == 9.0 {
            c.check(
                format!("lambda=9: {} above 1%, want exactly {max_over}", over.len()),
                over.len() == max_over,
            );
            for (alloc, e) in &over {
                c.check(
                    format!("lambda=9: {alloc} ({e:.5}) has five clusters on one sequence"),
                    alloc.groups().iter().any(|g| g.len() == 5),
                );
            }
        } else {
            c.check(
                format!(
                    "lambda=19: {} above 1%, want at most {max_over}",
                    over.len()
                ),
                over.len() <= max_over,
            );
        }
    }
    c.report()
}

fn criterion_6() -> bool {
    let mut c = Criterion::new(6, "Moment approximations");
    let ept = SizeMoments::new(495.23, 0.9975).unwrap();
    let s = moment_summary(&ept, 276.0, 5).unwrap();
    c.near("EPT W first order", s.w_first, 0.1799, 5e-4);
    c.near("EPT W second order", s.w_second, 0.1817, 5e-4);
    c.near("EPT W beta", s.w_beta, 0.1980, 5e-4);
    let m = SizeMoments::new(4.667, 0.3499).unwrap();
    for (lambda, w1, w2, wb) in [
        (9.0, 0.1687, 0.1709, 0.2235),
        (19.0, 0.1239, 0.1278, 0.1864),
    ] {
        let s = moment_summary(&m, lambda, 4).unwrap();
        c.near(&format!("RRT lambda={lambda} W first"), s.w_first, w1, 5e-4);
        c.near(
            &format!("RRT lambda={lambda} W second"),
            s.w_second,
            w2,
            5e-4,
        );
        c.near(&format!("RRT lambda={lambda} W beta"), s.w_beta, wb, 5e-4);
    }
    c.report()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Random cluster set, design and allocation occupying at least two sequences.
fn random_case(rng: &mut ChaCha8Rng) -> (ClusterSet, usize, f64, Allocation) {
    let periods = rng.random_range(3..=6);
    let s = periods - 1;
    let c = rng.random_range(2..=12);
    let sizes: Vec<u64> = (0..c).map(|_| rng.random_range(1..=50)).collect();
    let lambda = 10f64.powf(rng.random_range(-1.0..=4.0));
    let assignment = loop {
        let a: Vec<usize> = (0..c).map(|_| rng.random_range(1..=s)).collect();
        if a.iter().any(|&l| l != a[0]) {
            break a;
        }
    };
    (
        ClusterSet::new(sizes).unwrap(),
        periods,
        lambda,
        Allocation::new(assignment, s).unwrap(),
    )
}

fn criterion_7() -> bool {
    let mut c = Criterion::new(7, "Scalar route agrees with the information-matrix route");
    let tol = 1e-10;
    for lambda in [9.0, 19.0] {
        let config = rrt_config(lambda);
        let mut worst = 0.0f64;
        for alloc in swd_core::search::canonical_allocations(&rrt(), 3, u128::MAX).unwrap() {
            if alloc.occupied() < 2 {
                continue;
            }
            let a = alloc.to_allocation(&rrt()).unwrap();
            let s = exact_precision_scalar(&config, &rrt(), &a).unwrap();
            let m = exact_precision_matrix(&config, &rrt(), &a).unwrap();
            worst = worst.max(rel(s.v_exact, m.v_exact));
        }
        c.check(
            format!("RRT lambda={lambda}: worst relative gap {worst:.2e}"),
            worst <= tol,
        );
    }
    for mu in [None, Some(0.0), Some(0.5), Some(2.0)] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let (clusters, periods, lambda, alloc) = random_case(&mut rng);
            let mut config = TrialConfig::cross_sectional(periods, lambda).unwrap();
            if let Some(mu) = mu {
                config = config.with_closed_cohort(mu).unwrap();
            }
            let s = exact_precision_scalar(&config, &clusters, &alloc).unwrap();
            let m = exact_precision_matrix(&config, &clusters, &alloc).unwrap();
            worst = worst.max(rel(s.v_exact, m.v_exact));
        }
        let label = mu.map_or("cross-sectional".to_string(), |m| {
            format!("closed cohort mu={m}")
        });
        c.check(
            format!("1000 random sets, {label}: worst relative gap {worst:.2e}"),
            worst <= tol,
        );
    }
    c.report()
}

fn criterion_8() -> bool {
    use support::{gls_variance, simulate, Components};
    let mut c = Criterion::new(8, "Monte Carlo GLS check");
    let clusters = rrt();
    let best = enumerate(&clusters, &rrt_config(9.0), &SearchScheme::exhaustive()).unwrap()[0]
        .allocation
        .clone();
    let alloc = best.to_allocation(&clusters).unwrap();
    let seqs = alloc.assignment().to_vec();

    let cases = [
        (
            "cross-sectional",
            None,
            Components {
                tau2: 1.0,
                sigma_e2: 9.0,
                omega2: 0.0,
            },
        ),
        (
            "closed cohort mu=2",
            Some(2.0),
            Components {
                tau2: 1.0,
                sigma_e2: 9.0,
                omega2: 2.0,
            },
        ),
    ];
    for (i, (label, mu, comp)) in cases.into_iter().enumerate() {
        let mut config = rrt_config(9.0).with_sigma_e2(9.0).unwrap();
        if let Some(mu) = mu {
            config = config.with_closed_cohort(mu).unwrap();
        }
        let analytic = exact_precision_scalar(&config, &clusters, &alloc)
            .unwrap()
            .var_theta;
        let oracle = gls_variance(clusters.sizes(), &seqs, 4, comp);
        c.check(
            format!("{label}: analytic {analytic:.6} vs explicit GLS {oracle:.6}"),
            rel(analytic, oracle) < 1e-10,
        );
        let mc = simulate(clusters.sizes(), &seqs, 4, comp, 20_000, 1000 + i as u64);
        let se = mc.variance_se(analytic);
        c.check(
            format!(
                "{label}: empirical var {:.6} vs {analytic:.6}, {:.2} SE",
                mc.variance,
                (mc.variance - analytic) / se
            ),
            (mc.variance - analytic).abs() < 3.0 * se,
        );
    }
    c.report()
}

fn random_unequal(rng: &mut ChaCha8Rng) -> (ClusterSet, TrialConfig) {
    let periods = rng.random_range(3..=8);
    let c = rng.random_range(2..=20);
    let sizes: Vec<u64> = loop {
        let s: Vec<u64> = (0..c).map(|_| rng.random_range(1..=200)).collect();
        if s.iter().any(|&n| n != s[0]) {
            break s;
        }
    };
    let lambda = 10f64.powf(rng.random_range(-2.0..=6.0));
    (
        ClusterSet::new(sizes).unwrap(),
        TrialConfig::cross_sectional(periods, lambda).unwrap(),
    )
}

fn criterion_9() -> bool {
    let mut c = Criterion::new(9, "Property suite");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut beta_bad, mut h3_bad, mut gap_bad, mut mirror_bad) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let (clusters, config) = random_unequal(&mut rng);
        let model = ApproxModel::new(&config, &clusters).unwrap();
        if model.fit.beta <= 1.0 {
            beta_bad += 1;
        }
        if model.constants.h3 <= 0.0 {
            h3_bad += 1;
        }
        if model.constants.outer_gap() <= 0.0 {
            gap_bad += 1;
        }
        let s = config.sequences();
        let assignment = loop {
            let a: Vec<usize> = (0..clusters.len())
                .map(|_| rng.random_range(1..=s))
                .collect();
            if a.iter().any(|&l| l != a[0]) {
                break a;
            }
        };
        let a = Allocation::new(assignment, s).unwrap();
        let m = a.mirror(s);
        let va = model
            .evaluate(&derive_profile(&config, &clusters, &a).unwrap())
            .total();
        let vm = model
            .evaluate(&derive_profile(&config, &clusters, &m).unwrap())
            .total();
        let ea = exact_precision_scalar(&config, &clusters, &a)
            .unwrap()
            .v_exact;
        let em = exact_precision_scalar(&config, &clusters, &m)
            .unwrap()
            .v_exact;
        if va.to_bits() != vm.to_bits() || rel(ea, em) > 1e-12 {
            mirror_bad += 1;
        }
    }
    c.check(format!("beta > 1 fails on {beta_bad}/1000"), beta_bad == 0);
    c.check(format!("h3 > 0 fails on {h3_bad}/1000"), h3_bad == 0);
    c.check(
        format!("1 - gamma W (S-1) > 0 fails on {gap_bad}/1000"),
        gap_bad == 0,
    );
    c.check(
        format!("mirror symmetry fails on {mirror_bad}/1000"),
        mirror_bad == 0,
    );

    let mut worst = 0.0f64;
    for s in 2..=10 {
        for _ in 0..20 {
            let c_count = rng.random_range(2..=15);
            let sizes: Vec<u64> = (0..c_count).map(|_| rng.random_range(1..=100)).collect();
            let config =
                TrialConfig::cross_sectional(s + 1, 10f64.powf(rng.random_range(-1.0..=4.0)))
                    .unwrap();
            let clusters = ClusterSet::new(sizes).unwrap();
            let model = ApproxModel::new(&config, &clusters).unwrap();
            let lu = model.constants.a_matrix.clone().lu();
            let ones = DVector::from_element(s, 1.0);
            let direct1 = lu.solve(&ones).unwrap();
            let directz = lu.solve(&model.geometry.z).unwrap();
            let closed1 = a_inv_ones(&model.constants, &model.geometry);
            let closedz = a_inv_z(&model.constants, &model.geometry);
            worst = worst
                .max((&closed1 - &direct1).norm() / direct1.norm())
                .max((&closedz - &directz).norm() / directz.norm());
        }
    }
    c.check(
        format!("A^-1 1 and A^-1 z closed forms, S=2..10: worst {worst:.2e}"),
        worst < 1e-10,
    );

    let mut over = 0;
    for _ in 0..1000 {
        let m =
            SizeMoments::new(rng.random_range(1.0..=1000.0), rng.random_range(0.0..=2.0)).unwrap();
        let t = rng.random_range(2..=10);
        let lambda = 10f64.powf(rng.random_range(-2.0..=5.0));
        if approx_w_beta(&m, lambda, t).unwrap() > 1.0 / t as f64 {
            over += 1;
        }
    }
    c.check(
        format!("W beta <= 1/T from moments fails on {over}/1000"),
        over == 0,
    );

    let mut eq_worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=100u64);
        let periods = rng.random_range(3..=8);
        let lambda = 10f64.powf(rng.random_range(-1.0..=4.0));
        let mu = [0.0, 0.5, 2.0, 10.0][rng.random_range(0..4)];
        let config = TrialConfig::cross_sectional(periods, lambda)
            .unwrap()
            .with_closed_cohort(mu)
            .unwrap();
        let clusters = ClusterSet::new(vec![n; rng.random_range(2..=12)]).unwrap();
        let fit = fit_regression(&config, &clusters);
        let geometry = build_geometry(periods - 1).unwrap();
        let p = optimal_p_equal_case(&fit, &geometry);
        let m = n as f64 + mu;
        let want = m / (lambda + periods as f64 * m);
        for l in 1..periods - 2 {
            eq_worst = eq_worst.max((p[l] - want).abs());
        }
    }
    c.check(
        format!(
            "equal clusters: inner proportions (n+mu)/(lambda+T(n+mu)), worst gap {eq_worst:.2e}"
        ),
        eq_worst < 1e-12,
    );
    c.report()
}

fn criterion_10() -> bool {
    let mut c = Criterion::new(
        10,
        "Full-trial figures need individual sizes (conditional target, workflow only)",
    );
    // Synthetic 22 cluster sizes; the published figures need the real ones.
    let sizes: Vec<u64> = vec![
        60, 95, 120, 150, 180, 210, 240, 270, 300, 330, 360, 400, 440, 480, 520, 580, 640, 700,
        800, 950, 1200, 1500,
    ];
    let clusters = ClusterSet::new(sizes).unwrap();
    let config = TrialConfig::cross_sectional(5, 276.0).unwrap();
    let scheme = SearchScheme::random(SearchMode::RandomClusterBalanced, 1000, 5);
    match recommend(&clusters, &config, &scheme, 0.99) {
        Ok(rec) => {
            c.check(
                format!(
                    "recommend ran: {} qualifiers of {}, tally {:?}",
                    rec.audit.qualifiers, rec.audit.draws, rec.audit.tally
                ),
                rec.choice.efficiency >= 0.99,
            );
        }
        Err(SwdError::NoQualifier { best, .. }) => {
            c.check(
                format!("no qualifier; best efficiency {best:.4}"),
                best <= 1.0 + 1e-6,
            );
        }
        Err(e) => c.check(format!("recommend failed: {e}"), false),
    }
    let unrestricted = SearchScheme::random(SearchMode::RandomUnrestricted, 2000, 6);
    let draws = sample(&clusters, &config, &unrestricted).unwrap();
    let reps: usize = draws
        .iter()
        .filter(|d| mirror_representative(&d.allocation) == d.allocation)
        .count();
    c.check(
        format!(
            "unrestricted sampling produced {} estimable draws ({reps} mirror representatives)",
            draws.len()
        ),
        !draws.is_empty(),
    );
    c.report()
}

fn main() -> ExitCode {
    let results = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
