//! Shell command templates with `{name}` placeholders.

use std::path::Path;
use std::process::Command;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandHook {
    template: String,
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

impl CommandHook {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        if template.trim().is_empty() {
            return Err(Error::Config("command template is empty".into()));
        }
        Ok(Self { template })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// Substitutes each `{key}` with the shell-quoted value.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        vars.iter()
            .fold(self.template.clone(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), &shell_quote(v)))
    }

    /// Runs the rendered command and returns its standard output.
    pub fn run(&self, vars: &[(&str, &str)]) -> Result<String> {
        let cmd = self.render(vars);
        let out = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .output()
            .map_err(|e| Error::Backend(format!("failed to start `{cmd}`: {e}")))?;
        if !out.status.success() {
            return Err(Error::Backend(format!(
                "`{cmd}` exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    /// Alignment hook: maps a frame directory `{in}` to an aligned directory `{out}`.
    pub fn align(&self, input: &Path, output: &Path) -> Result<()> {
        std::fs::create_dir_all(output)?;
        self.run(&[("in", &input.to_string_lossy()), ("out", &output.to_string_lossy())])?;
        Ok(())
    }
}
