use mstcn_bench::{matrix, signal};

#[test]
fn signal_is_deterministic_and_bounded() {
    let a = signal(5000);
    assert_eq!(a, signal(5000));
    assert!(a.iter().all(|v| v.abs() <= 0.6));
}

#[test]
fn matrix_has_requested_shape() {
    assert_eq!(matrix(3, 7).shape(), &[3, 7]);
}
