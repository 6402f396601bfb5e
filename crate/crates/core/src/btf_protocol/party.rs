//! What each party holds, and the separation every run must respect.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Client,
    Server,
    TrustedParty,
}

/// Items a party may keep between protocol steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Holding {
    Sk,
    K,
    KPrime,
    Evk,
    PkK,
    PkC,
    Dk,
    EncDk,
    Iv,
    W,
    C,
    EncW,
    EncKbar,
    CipherState,
    HomCipherState,
    R,
}

/// A snapshot of one party's stored items.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyState {
    pub role: Role,
    pub client: Option<u32>,
    pub holdings: BTreeSet<Holding>,
}

impl PartyState {
    pub fn holds(&self, h: Holding) -> bool {
        self.holdings.contains(&h)
    }
}

fn violation(state: &PartyState, what: &str) -> Error {
    Error::Separation(format!("{:?} holds {what}", state.role))
}

/// The server never holds k or sk and the trusted party never holds k, k′,
/// w or c. Under the three-party model nobody holds sk together with k or
/// k′; the two-party baselines leave both with the client by design.
pub fn check_separation(model: Model, state: &PartyState) -> Result<()> {
    use Holding::*;
    if model == Model::Btf && state.holds(Sk) && (state.holds(K) || state.holds(KPrime)) {
        return Err(violation(state, "sk together with a symmetric key"));
    }
    match state.role {
        Role::Server => {
            for h in [K, Sk] {
                if state.holds(h) {
                    return Err(violation(state, &format!("{h:?}")));
                }
            }
        }
        Role::TrustedParty => {
            for h in [K, KPrime, W, C] {
                if state.holds(h) {
                    return Err(violation(state, &format!("{h:?}")));
                }
            }
        }
        Role::Client => {}
    }
    Ok(())
}
