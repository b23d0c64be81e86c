use std::time::Instant;

use rand::Rng;
use softrod::config::RunConfig;
use softrod::policy::random_stream;
use softrod::vector::VectorEnv;
use softrod_core::dynamics::Scheme;
use softrod_core::envs::{make_env, StepResult, TaskKind, TaskSpec};

fn random_rows(rngs: &mut [rand_chacha::ChaCha8Rng], dim: usize) -> Vec<Vec<f64>> {
    rngs.iter_mut().map(|r| (0..dim).map(|_| r.random_range(-1.0..=1.0)).collect()).collect()
}

fn run(task: TaskKind, workers: usize, steps: usize) -> Vec<StepResult> {
    let spec = RunConfig::default().with_task(task).task_spec().unwrap();
    let mut venv = VectorEnv::new(spec, 8, workers).unwrap();
    let seeds: Vec<u64> = (0..8).map(|i| 40 + i).collect();
    venv.reset(&seeds).unwrap();
    let mut rngs: Vec<_> = seeds.iter().map(|&s| random_stream(s)).collect();
    let dim = venv.envs()[0].action_dim();
    let mut out = Vec::new();
    for _ in 0..steps {
        for r in venv.step(&random_rows(&mut rngs, dim)).unwrap() {
            out.push(r.unwrap());
        }
    }
    out
}

#[test]
fn worker_count_does_not_change_results() {
    for task in [TaskKind::Ik4d, TaskKind::Obstacles2dTight] {
        let a = run(task, 1, 6);
        let b = run(task, 8, 6);
        let bits = |rs: &[StepResult]| -> Vec<u64> {
            rs.iter().flat_map(|r| r.observation.iter().chain([&r.reward])).map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b), "{task}");
        assert_eq!(a.iter().map(|r| &r.info).collect::<Vec<_>>(), b.iter().map(|r| &r.info).collect::<Vec<_>>());
    }
}

#[test]
fn vector_matches_sequential_single_envs() {
    let spec = TaskSpec::new(TaskKind::FollowTarget, Scheme::Implicit);
    let mut venv = VectorEnv::new(spec.clone(), 3, 3).unwrap();
    let seeds = [5, 6, 7];
    let obs = venv.reset(&seeds).unwrap();
    let actions = vec![vec![0.4; 10], vec![-0.2; 10], vec![1.0; 10]];
    let batch = venv.step(&actions).unwrap();
    for i in 0..3 {
        let mut env = make_env(spec.clone()).unwrap();
        assert_eq!(env.reset(seeds[i]), obs[i]);
        assert_eq!(&env.step(&actions[i]).unwrap(), batch[i].as_ref().unwrap());
    }
}

#[test]
fn one_failing_env_leaves_the_others_alone() {
    let spec = TaskSpec::new(TaskKind::Obstacles2dTight, Scheme::Implicit);
    let mut venv = VectorEnv::new(spec, 3, 2).unwrap();
    venv.reset(&[0, 1, 2]).unwrap();
    let out = venv.step(&[vec![0.1; 5], vec![0.1; 2], vec![0.1; 5]]).unwrap();
    assert!(out[0].is_ok() && out[2].is_ok());
    assert!(out[1].is_err());
    assert_eq!(out[0].as_ref().unwrap(), out[2].as_ref().unwrap());
    // The shape of the batch itself is checked up front.
    assert!(venv.step(&[vec![0.0; 5]]).is_err());
    assert!(venv.reset(&[1]).is_err());
}

#[test]
fn finished_envs_can_sit_out() {
    let spec = TaskSpec::new(TaskKind::Ik4d, Scheme::Implicit);
    let mut venv = VectorEnv::new(spec, 2, 2).unwrap();
    venv.reset(&[0, 1]).unwrap();
    let a = vec![0.0; 15];
    let out = venv.step_some(&[None, Some(&a)]).unwrap();
    assert!(out[0].is_none() && out[1].as_ref().unwrap().is_ok());
    assert_eq!(venv.envs()[0].elapsed_steps(), 0);
    assert_eq!(venv.envs()[1].elapsed_steps(), 1);
}

#[test]
fn parallel_stepping_halves_wall_time_on_eight_cores() {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores < 8 {
        eprintln!("skipped: {cores} cores available, 8 needed");
        return;
    }
    let spec = TaskSpec::new(TaskKind::FollowTarget, Scheme::Implicit);
    let time = |workers: usize| {
        let mut venv = VectorEnv::new(spec.clone(), 64, workers).unwrap();
        let seeds: Vec<u64> = (0..64).collect();
        venv.reset(&seeds).unwrap();
        let mut rngs: Vec<_> = seeds.iter().map(|&s| random_stream(s)).collect();
        let start = Instant::now();
        for _ in 0..10 {
            venv.step(&random_rows(&mut rngs, 10)).unwrap();
        }
        start.elapsed().as_secs_f64()
    };
    let sequential = time(1);
    let parallel = time(8);
    assert!(parallel < 0.5 * sequential, "parallel {parallel:.3} s vs sequential {sequential:.3} s");
}
