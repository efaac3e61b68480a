use super::*;

fn tilt(st: &FlowState) -> f64 {
    // F_1 = cosh t ê_1 + sinh t ê_4 up to Gram–Schmidt
    st.frame()[3][0].asinh()
}

fn ric(m: Vec<Vec<f64>>) -> RicciTensor {
    let k = m.len();
    RicciTensor {
        ric: m,
        lambda: vec![0.0; k],
        path: crate::connection::RicciPath::ClosedForm,
        base_point: vec![],
    }
}

#[test]
fn deformation_is_linear_and_signed() {
    let metric = MetricSplit::new(vec![1, 1], vec![-1, 1, -1]).unwrap();
    let r = vec![vec![1.0, 2.0, -3.0], vec![0.5, 0.0, 4.0]];
    let a = deformation_from_ric(&ric(r.clone()), &metric, FlowDirection::Forward);
    assert_eq!(a, vec![vec![1.0, -2.0, -3.0], vec![0.5, 0.0, 4.0]]);
    let two = r.iter().map(|row| row.iter().map(|x| 2.0 * x).collect()).collect();
    let a2 = deformation_from_ric(&ric(two), &metric, FlowDirection::Forward);
    for (x, y) in a.iter().flatten().zip(a2.iter().flatten()) {
        assert_eq!(2.0 * x, *y);
    }
    let b = deformation_from_ric(&ric(r), &metric, FlowDirection::Backward);
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        assert_eq!(*x, -y);
    }
    let z = deformation_from_ric(&ric(vec![vec![0.0; 3]; 2]), &metric, FlowDirection::Forward);
    assert!(z.iter().flatten().all(|&x| x == 0.0));
}

#[test]
fn direct_sum_double_is_a_fixed_point() {
    let st = tilted_double(1.0, 2.0, 0.0, vec![0.0; 3]).unwrap();
    assert_eq!(frobenius(&st.ricci().unwrap()), 0.0);
    let next = st.euler_step(0.1, FlowDirection::Forward).unwrap();
    assert_eq!(next.frame_distance(&st), 0.0);
    let traj = run_flow(&st, 5, 0.1, FlowDirection::Forward).unwrap();
    assert_eq!(traj.records.len(), 6);
    assert!(traj.records.iter().all(|r| r.ric_norm == 0.0 && r.frame == traj.records[0].frame));
    assert!((traj.records[5].t - 0.5).abs() < 1e-15);
}

#[test]
fn frame_stays_orthonormal_and_jacobi_holds() {
    for (kp, km, t) in [(1.0, 1.0, 0.3), (2.0, 1.0, -0.2), (1.0, -1.5, 0.5)] {
        for dir in [FlowDirection::Forward, FlowDirection::Backward] {
            let mut st = tilted_double(kp, km, t, vec![0.2, -0.1, 0.3]).unwrap();
            for _ in 0..10 {
                st = st.euler_step(0.02, dir).unwrap();
                assert!(st.orthonormality_defect() <= 1e-9);
                let res = st.structure().unwrap().check_master_equation(1e-10).unwrap();
                assert!(res.is_valid(), "{}", res.max_abs());
            }
            assert_eq!(st.step_log().len(), 10);
        }
    }
}

#[test]
fn forward_flow_untilts_the_double() {
    let st = tilted_double(1.0, 1.0, 0.3, vec![0.0; 3]).unwrap();
    let traj = run_flow(&st, 20, 0.05, FlowDirection::Forward).unwrap();
    assert!(traj.rejected.is_none());
    for w in traj.records.windows(2) {
        assert!(w[1].ric_norm < w[0].ric_norm);
    }
    assert!(tilt(&traj.final_state) < 0.3);
    let back = run_flow(&st, 5, 0.05, FlowDirection::Backward).unwrap();
    assert!(back.records[5].ric_norm > back.records[0].ric_norm);
}

#[test]
fn steps_zero_echoes_the_state() {
    let st = tilted_double(1.0, 1.0, 0.2, vec![0.0; 3]).unwrap();
    let traj = run_flow(&st, 0, 0.1, FlowDirection::Forward).unwrap();
    assert_eq!(traj.records.len(), 1);
    assert_eq!(traj.records[0].t, 0.0);
    assert_eq!(traj.records[0].frame, st.frame());
    assert_eq!(traj.final_state.frame_distance(&st), 0.0);
}

#[test]
fn step_change_is_first_order_in_dt() {
    // Δ(h) = F(h) − F(0) is h·V + O(h²), so |Δ(h) − 2Δ(h/2)| shrinks by 4 per halving
    let st = tilted_double(2.0, 1.0, 0.25, vec![0.1, 0.0, -0.2]).unwrap();
    let delta = |h: f64| -> Vec<f64> {
        let n = st.euler_step(h, FlowDirection::Forward).unwrap();
        n.frame()
            .iter()
            .flatten()
            .zip(st.frame().iter().flatten())
            .map(|(x, y)| x - y)
            .collect()
    };
    let defect = |h: f64| -> f64 {
        let (a, b) = (delta(h), delta(h / 2.0));
        a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - 2.0 * y).abs()))
    };
    let hs = [0.04, 0.02, 0.01, 0.005];
    let e: Vec<f64> = hs.iter().map(|&h| defect(h)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "{e:?}");
    }
}

#[test]
fn one_step_follows_the_closed_form_prediction() {
    // the change in Ric after one step is linear in dt up to O(dt²)
    let st = tilted_double(1.0, 1.0, 0.3, vec![0.0; 3]).unwrap();
    let r0 = st.ricci().unwrap();
    let change = |h: f64| -> Vec<f64> {
        let r = st.euler_step(h, FlowDirection::Forward).unwrap().ricci().unwrap();
        r.ric.iter().flatten().zip(r0.ric.iter().flatten()).map(|(x, y)| x - y).collect()
    };
    let slope = |h: f64| -> Vec<f64> { change(h).into_iter().map(|x| x / h).collect() };
    let (s1, s2, s3) = (slope(1e-3), slope(5e-4), slope(2.5e-4));
    let d12 = s1.iter().zip(&s2).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let d23 = s2.iter().zip(&s3).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(d12 > 0.0 && (d12 / d23 - 2.0).abs() < 0.1, "{d12} {d23}");
    // and the tilt moves towards the direct sum
    let n = st.euler_step(1e-3, FlowDirection::Forward).unwrap();
    assert!(tilt(&n) < 0.3);
}

#[test]
fn oversized_step_is_rejected_with_partial_trajectory() {
    let st = tilted_double(2.0, 1.0, 0.4, vec![0.0; 3]).unwrap();
    assert!(matches!(st.euler_step(1e3, FlowDirection::Forward), Err(Error::StepRejected(_))));
    let traj = run_flow(&st, 3, 1e3, FlowDirection::Forward).unwrap();
    assert_eq!(traj.records.len(), 1);
    assert!(matches!(traj.rejected, Some(Error::StepRejected(_))));
}

#[test]
fn rejects_bad_states() {
    let id: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| (i == j) as u8 as f64).collect()).collect();
    let mut skew = id.clone();
    skew[0][1] = 0.5;
    assert!(matches!(
        FlowState::new(vec![1, 1, 1], 3, vec![([0, 1, 2], 1.0)], skew, vec![0.0; 3]),
        Err(Error::Shape(_))
    ));
    assert!(matches!(
        FlowState::new(vec![1, 1, 1], 3, vec![([0, 1, 2], 1.0)], id.clone(), vec![0.0; 2]),
        Err(Error::Shape(_))
    ));
    // e123 + e345 fails Jacobi on (e1, e2, e4)
    let id5: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| (i == j) as u8 as f64).collect()).collect();
    assert!(matches!(
        FlowState::new(vec![1; 5], 2, vec![([0, 1, 2], 1.0), ([2, 3, 4], 1.0)], id5, vec![0.0; 2]),
        Err(Error::MasterEquationFailure(_))
    ));
}

#[test]
fn from_structure_uses_the_identity_frame() {
    let st = tilted_double(1.0, 1.0, 0.0, vec![0.0; 3]).unwrap();
    let nq = st.structure().unwrap();
    let again = FlowState::from_structure(&nq, vec![0.0; 3]).unwrap();
    assert_eq!(again.frame_distance(&st), 0.0);
    assert_eq!(again.structure_constants(), st.structure_constants());
}
