//! PDF text extraction through an external command.
//!
//! The command is a template split on whitespace. `{input}` is replaced by
//! the path of a temporary file holding the PDF bytes and `{output}` by the
//! path the command must write text to. Without `{input}` the bytes go to
//! stdin; without `{output}` the text is read from stdout. Example:
//! `pdftotext -enc UTF-8 {input} {output}` or `pdftotext - -`.

use std::io::Write;
use std::process::{Command, Stdio};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("extractor command template is empty")]
    EmptyTemplate,
    #[error("extractor failed: {0}")]
    Failed(String),
    #[error("extractor output is not UTF-8")]
    NotUtf8,
    #[error("extractor produced no text")]
    EmptyText,
}

#[derive(Debug, Clone)]
pub struct PdfExtractor {
    template: Vec<String>,
}

impl PdfExtractor {
    pub fn new(template: &str) -> Result<Self, ExtractError> {
        let template: Vec<String> = template.split_whitespace().map(str::to_string).collect();
        if template.is_empty() {
            return Err(ExtractError::EmptyTemplate);
        }
        Ok(PdfExtractor { template })
    }

    pub fn extract(&self, pdf: &[u8]) -> Result<String, ExtractError> {
        let failed = |e: std::io::Error| ExtractError::Failed(e.to_string());
        let dir = tempfile::tempdir().map_err(failed)?;
        let input = dir.path().join("input.pdf");
        let output = dir.path().join("output.txt");
        let uses_input = self.template.iter().any(|a| a.contains("{input}"));
        let uses_output = self.template.iter().any(|a| a.contains("{output}"));
        if uses_input {
            std::fs::write(&input, pdf).map_err(failed)?;
        }
        let args: Vec<String> = self
            .template
            .iter()
            .map(|a| {
                a.replace("{input}", &input.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
            })
            .collect();
        let mut child = Command::new(&args[0])
            .args(&args[1..])
            .stdin(if uses_input { Stdio::null() } else { Stdio::piped() })
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ExtractError::Failed(format!("{}: {e}", args[0])))?;
        if !uses_input {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            let bytes = pdf.to_vec();
            // Written from a thread so a command that streams output before
            // draining stdin cannot deadlock.
            std::thread::spawn(move || stdin.write_all(&bytes));
        }
        let out = child.wait_with_output().map_err(failed)?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(ExtractError::Failed(format!("{}: {}", out.status, stderr.trim())));
        }
        let bytes = if uses_output {
            std::fs::read(&output).map_err(failed)?
        } else {
            out.stdout
        };
        let text = String::from_utf8(bytes).map_err(|_| ExtractError::NotUtf8)?;
        if text.trim().is_empty() {
            return Err(ExtractError::EmptyText);
        }
        Ok(text)
    }
}
