//! Error-model matrices checked against the bicycle equations themselves.

use etlqr::model::{build_plant, equilibrium, VehicleParams};
use proptest::prelude::*;

/// `(β̇, ψ̈, ë)` of the bicycle model written out term by term, with the
/// lateral error obeying `ë = Vx(β̇ + ψ̇) − Vx²ρ`.
fn bicycle_rates(p: &VehicleParams, beta: f64, yaw_rate: f64, steer: f64) -> [f64; 3] {
    let beta_dot = -(p.mu * (p.cf + p.cr)) / (p.m * p.vx) * beta
        - (1.0 + p.mu * (p.lf * p.cf - p.lr * p.cr) / (p.m * p.vx * p.vx)) * yaw_rate
        + p.mu * p.cf / (p.m * p.vx) * steer;
    let yaw_acc = -(p.mu * (p.lf * p.cf - p.lr * p.cr)) / p.iz * beta
        - p.mu * (p.lf * p.lf * p.cf + p.lr * p.lr * p.cr) / (p.iz * p.vx) * yaw_rate
        + p.mu * p.lf * p.cf / p.iz * steer;
    let lateral_acc = p.vx * (beta_dot + yaw_rate) - p.vx * p.vx * p.rho;
    [beta_dot, yaw_acc, lateral_acc]
}

fn params() -> impl Strategy<Value = VehicleParams> {
    (
        500.0f64..3000.0,
        0.05f64..=1.0,
        1.0f64..40.0,
        500.0f64..5000.0,
        (2e4f64..3e5, 2e4f64..3e5),
        (0.5f64..2.5, 0.5f64..2.5),
    )
        .prop_map(|(m, mu, vx, iz, (cf, cr), (lf, lr))| VehicleParams {
            m,
            mu,
            vx,
            iz,
            cf,
            cr,
            lf,
            lr,
            rho: 0.0,
        })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn plant_matches_bicycle_equations(p in params()) {
        let plant = build_plant(&p).unwrap();
        // Column j of [A | B] is the response to a unit value of state/input j.
        let columns = [
            bicycle_rates(&p, 1.0, 0.0, 0.0),
            bicycle_rates(&p, 0.0, 1.0, 0.0),
            bicycle_rates(&p, 0.0, 0.0, 1.0),
        ];
        for (j, column) in columns.iter().enumerate() {
            for (row, &expected) in column.iter().enumerate() {
                let got = if j < 2 { plant.a[(row, j)] } else { plant.b[row] };
                prop_assert!(close(got, expected), "column {j}, row {row}: {got} vs {expected}");
            }
        }
        for row in 0..3 {
            prop_assert_eq!(plant.a[(row, 2)], 0.0);
            prop_assert_eq!(plant.a[(row, 3)], 0.0);
        }
        prop_assert_eq!(plant.a.row(3).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.0]);
        prop_assert_eq!(plant.b[3], 0.0);
    }

    #[test]
    fn equilibrium_is_a_steady_state(p in params(), rho in -0.02f64..0.02) {
        let p = VehicleParams { rho, ..p };
        let eq = equilibrium(&p).unwrap();
        let [beta_dot, yaw_acc, lateral_acc] = bicycle_rates(&p, eq.beta_star, eq.psidot_star, eq.delta_star);
        // Cancellation scale: sum of |term| in each rate, via the plant matrices.
        let plant = build_plant(&p).unwrap();
        let x = [eq.beta_star, eq.psidot_star];
        let scale = |row: usize| {
            plant.a[(row, 0)].abs() * x[0].abs() + plant.a[(row, 1)].abs() * x[1].abs() + plant.b[row].abs() * eq.delta_star.abs()
        };
        prop_assert!(beta_dot.abs() <= 1e-12 * scale(0), "beta_dot {beta_dot}");
        prop_assert!(yaw_acc.abs() <= 1e-12 * scale(1), "yaw_acc {yaw_acc}");
        prop_assert!(lateral_acc.abs() <= 1e-12 * (scale(2) + p.vx * p.vx * rho.abs()), "lateral_acc {lateral_acc}");
    }

    #[test]
    fn equilibrium_linear_in_curvature(p in params(), rho in -0.02f64..0.02) {
        let e1 = equilibrium(&VehicleParams { rho, ..p }).unwrap();
        let e2 = equilibrium(&VehicleParams { rho: 2.0 * rho, ..p }).unwrap();
        prop_assert_eq!(e2.beta_star, 2.0 * e1.beta_star);
        prop_assert_eq!(e2.psidot_star, 2.0 * e1.psidot_star);
        prop_assert!(close(e2.delta_star, 2.0 * e1.delta_star));
    }
}
