// Own test binary: it mutates the process environment.
use softrod::vector::{effective_workers, VectorEnv, THREADS_ENV};
use softrod_core::dynamics::Scheme;
use softrod_core::envs::{TaskKind, TaskSpec};

#[test]
fn thread_cap_from_environment() {
    std::env::set_var(THREADS_ENV, "2");
    assert_eq!(effective_workers(8), 2);
    assert_eq!(effective_workers(1), 1);
    let venv = VectorEnv::new(TaskSpec::new(TaskKind::Ik4d, Scheme::Implicit), 4, 8).unwrap();
    assert_eq!(venv.workers(), 2);
    std::env::set_var(THREADS_ENV, "junk");
    assert_eq!(effective_workers(8), 8);
    std::env::remove_var(THREADS_ENV);
    assert_eq!(effective_workers(8), 8);
    assert_eq!(effective_workers(0), 1);
}
