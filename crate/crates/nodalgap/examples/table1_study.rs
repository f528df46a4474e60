use nodalgap::geometry::*;
use nodalgap::mesh::build_mesh;
use nodalgap::modes::*;
use nodalgap::nodal::*;
use nodalgap::spectral::*;

fn main() {
    let sin6 = BoundaryProfile::new(
        ProfileKind::Sinusoid { frequency: 6, phase: Phase::Sin },
        SmoothnessClass::Lipschitz,
    );
    for n in [4.7741f64, 10.04] {
        for n_y in [129usize, 193, 257, 321] {
            let t0 = std::time::Instant::now();
            let spec = DomainSpec::new(n, 0.5, sin6.clone()).unwrap();
            let mesh = build_mesh(&spec, n_y).unwrap();
            let op = assemble(&mesh).unwrap();
            let opts = SolveOptions { pairs: 4, ..Default::default() };
            let sols = solve_near(&op, target_shift(n), &opts).unwrap();
            let mut sol = select_mode(sols, &spec).unwrap();
            normalize_sign(&mut sol).unwrap();
            let mu = sol.mu;
            let mu1 = (mu - std::f64::consts::PI.powi(2)).sqrt();
            let nodal = extract_nodal_set(&sol.field);
            let d = measure_gap(&nodal, Rect::center_window(n)).map(|g| g.d).unwrap_or(f64::NAN);
            println!(
                "N={n} n_y={n_y}: mu={mu:.4} |sin(mu1 N)|={:.5} d={d:.5} [{:.0} s]",
                (mu1 * n).sin().abs(),
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
