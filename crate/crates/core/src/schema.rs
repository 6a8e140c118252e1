//! Version tag carried by every on-disk configuration file.

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn current() -> u32 {
    FORMAT_VERSION
}

/// Rejects files written for another schema version.
pub fn check_version(kind: &str, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "{kind} format_version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}
