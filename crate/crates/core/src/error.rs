use thiserror::Error;

use crate::network::PartyId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator is not hermitian: entry ({row},{col}) = {value} but conj of ({col},{row}) = {mirror}")]
    NonHermitian {
        row: usize,
        col: usize,
        value: String,
        mirror: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("impossible branch: announcement {announcement} has probability {probability:e} for signals ({left},{right})")]
    ImpossibleBranch {
        announcement: char,
        left: char,
        right: char,
        probability: f64,
    },

    #[error("party graph is disconnected; components: {}", format_components(.components))]
    Disconnected { components: Vec<Vec<PartyId>> },

    #[error("planning failed: {0}")]
    Planning(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}

fn format_components(components: &[Vec<PartyId>]) -> String {
    components
        .iter()
        .map(|c| {
            let ids: Vec<String> = c.iter().map(|p| p.to_string()).collect();
            format!("{{{}}}", ids.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}
