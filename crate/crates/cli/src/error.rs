use serde_json::json;

/// Failure of one invocation, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(relkep::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(relkep::Error::InvalidParameter(_)) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (error, kind, message) = match self {
            CliError::Usage(m) => ("usage", "usage", m.clone()),
            CliError::Io(e) => ("io", "io", e.to_string()),
            CliError::Core(e) => {
                let kind = match e {
                    relkep::Error::Domain(_) => "domain",
                    relkep::Error::InvalidParameter(_) => "invalid_parameter",
                    relkep::Error::NoSuchOrbit { .. } => "no_such_orbit",
                    relkep::Error::Collision { .. } => "collision",
                    relkep::Error::Resolution { .. } => "resolution",
                    relkep::Error::NoConvergence(_) => "no_convergence",
                };
                let error = if self.exit_code() == 2 { "usage" } else { "domain" };
                (error, kind, e.to_string())
            }
        };
        json!({ "error": error, "kind": kind, "message": message })
    }
}

impl From<relkep::Error> for CliError {
    fn from(e: relkep::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
