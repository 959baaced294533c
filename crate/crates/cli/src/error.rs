use std::fmt;
use std::path::Path;

/// Failure class; each maps to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Io,
    Input,
    Config,
    Compute,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Io => 3,
            Category::Input => 4,
            Category::Config => 5,
            Category::Compute => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Input => "input",
            Category::Config => "config",
            Category::Compute => "compute",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(Category::Io, format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(self, path: &Path) -> Self {
        Self {
            message: format!("{}: {}", path.display(), self.message),
            ..self
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.category.name(), self.message)
    }
}

impl From<stereobox::Error> for CliError {
    fn from(e: stereobox::Error) -> Self {
        use stereobox::Error as E;
        let category = match e {
            E::MalformedRow { .. } | E::MissingMatrix(_) | E::NonRectifiedPair(_) | E::MalformedScene { .. } => {
                Category::Input
            }
            E::Config(_) => Category::Config,
            _ => Category::Compute,
        };
        Self::new(category, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
