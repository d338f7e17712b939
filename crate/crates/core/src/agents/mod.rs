//! Local and global placement policies, masked action selection,
//! policy-gradient training with experience replay, and checkpoints.

mod checkpoint;
mod episode;
mod loss;
mod nn;
mod optim;
mod policy;
mod sampling;
mod train;
mod trajectory;

pub use checkpoint::{Checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use episode::{run_centralized_episode, run_global_episode, run_local_episode, Rollout};
pub use loss::{gradient_check, relative_error, surrogate_grad, surrogate_loss, GradCheck, LossConfig, Sample};
pub use nn::{Dense, Mlp, MlpCache};
pub use optim::{clip_grad_norm, global_norm, Adam};
pub use policy::{
    global_observe, local_observe, GlobalCache, GlobalObservation, GlobalPolicy, LocalCache, LocalObservation, LocalPolicy, Policy,
    HEAD_HIDDEN,
};
pub use sampling::{act, masked_log_softmax, masked_softmax, ActError, Decision, Mode};
pub use train::{
    init_global, init_local, joint_train, pretrain_local, replay_bytes, train_hierarchy, EpisodeStats, HierarchyOutcome, JointOutcome,
    Learner, PretrainOutcome, TrainConfig, TrainError, UpdateStats, IMPORTANCE_CLIP,
};
pub use trajectory::{ReplayBuffer, Step, Trajectory};
