pub mod absorption;
pub mod bd;
pub mod error;
pub mod game;
pub mod intertwine;
pub mod markov;
pub mod matrix;
pub mod montecarlo;
pub mod siegmund;
pub mod verify;

pub use absorption::{absorb_dist, AbsorptionDist, HorizonOpts, PgfExpr};
pub use bd::{BirthDeathSpec, ErgodicBDSpec};
pub use error::{Error, Result, StateLabel};
pub use game::{build_game, check_communication, preset_r_of_d, AbsorbingChain, ChainState, Coefficients, GameSpec, StateSpace};
pub use intertwine::{build_dual, dual_initial, Dual, DualInitial, PureBirthChain, SpectralLink};
pub use matrix::{augment_sink, classify, kron, kron_sum, restrict_sink, Matrix, StochKind};
pub use montecarlo::{simulate, simulate_coupled, SimConfig, SimReport};
pub use verify::{verify, Check, VerifyReport};
