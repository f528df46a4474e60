use nodalgap::geometry::*;
use nodalgap::mesh::build_mesh;
use nodalgap::modes::normalize_sign;
use nodalgap::nodal::*;
use nodalgap::spectral::*;

fn main() {
    let sin6 = BoundaryProfile::new(
        ProfileKind::Sinusoid { frequency: 6, phase: Phase::Sin },
        SmoothnessClass::Lipschitz,
    );
    let n = 5.0 / 3.0f64.sqrt();
    for eta in [0.02f64, 0.05, 0.08] {
        for n_y in [129usize, 257] {
            let spec = DomainSpec::new(n, eta, sin6.clone()).unwrap();
            let mesh = build_mesh(&spec, n_y).unwrap();
            let op = assemble(&mesh).unwrap();
            let opts = SolveOptions { pairs: 4, ..Default::default() };
            let sols = solve_near(&op, target_shift(n), &opts).unwrap();
            let mut sol = select_mode(sols, &spec).unwrap();
            normalize_sign(&mut sol).unwrap();
            let nodal = extract_nodal_set(&sol.field);
            match boundary_angles(&nodal, &sol.field, &spec) {
                Ok(angles) => {
                    let s: Vec<String> = angles
                        .iter()
                        .map(|a| format!("{:?}@({:.3},{:.3})={:.2}", a.side, a.point[0], a.point[1], a.angle_deg))
                        .collect();
                    println!("eta={eta} n_y={n_y}: {}", s.join("  "));
                }
                Err(e) => println!("eta={eta} n_y={n_y}: {e}"),
            }
            // Show the terminal vertices of each open branch end.
            if eta == 0.05 && n_y == 129 {
                for (bi, b) in nodal.branches.iter().enumerate() {
                    for (ei, end) in b.ends.iter().enumerate() {
                        if let Some(info) = end {
                            let pts: Vec<[f64; 2]> = if ei == 0 {
                                b.points.iter().take(6).copied().collect()
                            } else {
                                b.points.iter().rev().take(6).copied().collect()
                            };
                            let fmt: Vec<String> = pts.iter().map(|p| format!("({:.4},{:.4})", p[0], p[1])).collect();
                            println!("  branch {bi} end {ei} {:?}: {}", info.side, fmt.join(" "));
                        }
                    }
                }
            }
        }
    }
}
