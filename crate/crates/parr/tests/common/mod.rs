//! Shared fixtures for the integration suites: the frozen run
//! configurations every empirical criterion is measured against.

/// Chain run used by the oracle-convergence criterion. Budget chosen by
/// pilot runs and then frozen: 2,000 burn-in experiences plus 50,000
/// training steps at one action per step, replay large enough that nothing
/// is ever evicted, epsilon floored at 0.2 for persistent coverage.
pub const CHAIN_ORACLE_CONFIG: &str = r#"
    [env]
    kind = "chain"
    n_states = 8
    sticky_p = 0.0

    [agent]
    gamma = 0.8
    beta = 0.0
    refresh_interval = 500
    actions_per_train_step = 1
    burn_in = 2000
    batch_size = 32
    mode = "online_new"
    sampling = "prioritized"
    learning_rate = 5e-3

    [agent.epsilon]
    start = 1.0
    end = 0.2
    decay_steps = 15000

    [agent.seeds]
    params = 101
    policy = 102
    env = 103
    sampling = 104
    novelty_fixed = 105
    novelty_refresh = 106
    eval = 107

    [qnet]
    hidden = [64, 64]

    [replay]
    capacity = 65536

    [novelty]
    output_width = 16
    hidden_width = 32
    epochs = 1

    [run]
    total_env_steps = 52000
    eval_episodes = 3
    eval_episode_cap = 50
    deterministic_timing = true
"#;
