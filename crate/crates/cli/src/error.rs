use std::fmt;

/// Message plus process exit code: 2 usage or descriptor, 3 infeasible,
/// 4 numerical failure.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<ergocap::Error> for CliError {
    fn from(e: ergocap::Error) -> Self {
        use ergocap::Error as E;
        let code = match e {
            E::Dimension(_) | E::Domain(_) | E::Descriptor(_) => 2,
            E::Infeasible(_) => 3,
            E::Numerical(_) => 4,
        };
        Self {
            code,
            msg: e.to_string(),
        }
    }
}
