use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use glimpse::scoring::{CompletionClient, DumpWriter, FetchRequest, Label, Prompt, ProviderConfig};
use serde::Deserialize;

use super::DEFAULT_TOP_K;
use crate::cli::FetchArgs;
use crate::error::{CliError, CliResult};
use crate::settings::{layered, FileConfig};

#[derive(Deserialize)]
struct TextLine {
    id: String,
    #[serde(default)]
    label: Label,
    text: String,
}

fn read_texts(path: &Path) -> CliResult<Vec<FetchRequest>> {
    let file = File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TextLine = serde_json::from_str(&line)
            .map_err(|e| CliError::io(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(FetchRequest {
            id: t.id,
            label: t.label,
            text: t.text,
        });
    }
    Ok(out)
}

pub fn run(args: FetchArgs, file: &FileConfig) -> CliResult<()> {
    let provider_path = layered(args.provider_config, file.provider_config.clone(), "GLIMPSE_PROVIDER_CONFIG")?
        .ok_or_else(|| CliError::config("fetch needs --provider-config (or provider_config / GLIMPSE_PROVIDER_CONFIG)"))?;
    let mut config = ProviderConfig::from_file(&provider_path)
        .map_err(|e| CliError::from(e).context(provider_path.display()))?;
    if let Some(jobs) = layered(args.jobs, file.jobs, "GLIMPSE_JOBS")? {
        config.max_in_flight = jobs.max(1);
    }
    if config.api_key.is_none() {
        return Err(CliError::config(format!(
            "no API key: set api_key in {} or {}",
            provider_path.display(),
            glimpse::scoring::API_KEY_ENV
        )));
    }
    let prompt = layered(args.prompt_file, file.prompt_file.clone(), "GLIMPSE_PROMPT_FILE")?
        .map(Prompt::from_file)
        .transpose()?;
    let top_k = layered(args.top_k, file.top_k, "GLIMPSE_TOP_K")?.unwrap_or(DEFAULT_TOP_K);

    let requests = read_texts(&args.input)?;
    let client = CompletionClient::new(config)?;
    let results = client.fetch_many(&requests, prompt.as_ref(), top_k);

    let mut writer = DumpWriter::create(&args.out)?;
    let mut first_error = None;
    let mut failed = 0;
    for (req, r) in requests.iter().zip(results) {
        match r {
            Ok(obs) => writer.write(&obs)?,
            Err(e) => {
                failed += 1;
                log::error!("passage {}: {e}", req.id);
                first_error.get_or_insert(CliError::from(e).context(format!("passage {}", req.id)));
            }
        }
    }
    writer.finish()?;
    log::info!("fetched {} of {} passages", requests.len() - failed, requests.len());
    match first_error {
        Some(e) if !args.keep_going => Err(e),
        _ => Ok(()),
    }
}
