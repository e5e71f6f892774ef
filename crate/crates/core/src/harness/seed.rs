use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Independent random stream of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Channel,
    Noise,
    Data,
    Impairment,
}

impl Component {
    pub fn tag(&self) -> &'static str {
        match self {
            Component::Channel => "channel",
            Component::Noise => "noise",
            Component::Data => "data",
            Component::Impairment => "impairment",
        }
    }
}

/// ChaCha20 stream keyed by `SHA-256(master_le || trial_le || tag)`.
///
/// Both integers are hashed as full 64-bit little-endian words, so distinct
/// `(master, trial, component)` triples give distinct keys up to hash
/// collisions, for any trial index.
pub fn seed_stream(master: u64, trial: u64, component: Component) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(trial.to_le_bytes());
    h.update(component.tag().as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}
