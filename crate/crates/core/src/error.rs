use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("value outside the domain of {0}")]
    Domain(&'static str),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite value in {term}")]
    NonFinite { term: String },
    #[error("training diverged at epoch {epoch}, batch {batch}: {source}")]
    Diverged {
        epoch: usize,
        batch: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, found: usize) -> Self {
        Error::Shape {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn non_finite(term: impl Into<String>) -> Self {
        Error::NonFinite { term: term.into() }
    }
}
