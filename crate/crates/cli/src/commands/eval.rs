use std::collections::BTreeMap;

use glimpse::eval::{
    auroc, best_threshold, roc_curve, tpr_at_fpr, transfer_threshold,
    write_report_csv, write_roc_csv, Protocol, ReportRow, ScoredPopulation,
};
use glimpse::scoring::Label;

use crate::cli::EvalArgs;
use crate::error::{CliError, CliResult};
use crate::records::{output, read_scores};

/// `(method, estimator, dataset, source, K, M)`
type Key = (String, String, String, String, usize, usize);

fn populations(args: &EvalArgs) -> CliResult<BTreeMap<Key, ScoredPopulation>> {
    let mut groups: BTreeMap<Key, ScoredPopulation> = BTreeMap::new();
    for path in &args.inputs {
        for s in read_scores(path)? {
            let key = (
                s.method.clone(),
                s.estimator.clone(),
                s.aux.dataset.clone(),
                s.aux.source.clone(),
                s.aux.top_k,
                s.aux.rank_size,
            );
            let pop = groups.entry(key).or_insert_with(|| {
                ScoredPopulation::default().tagged(&s.method, &s.estimator, &s.aux.dataset, &s.aux.source)
            });
            match s.label {
                Label::Machine => pop.positives.push(s.metric),
                Label::Human => pop.negatives.push(s.metric),
                Label::Unknown => {}
            }
        }
    }
    if groups.is_empty() {
        return Err(CliError::io("no scores found"));
    }
    Ok(groups)
}

/// Accuracy of a threshold fitted on the other populations matching `peer`.
fn transferred(
    key: &Key,
    pop: &ScoredPopulation,
    groups: &BTreeMap<Key, ScoredPopulation>,
    protocol: Protocol,
) -> CliResult<f64> {
    let peer = |k: &Key| match protocol {
        Protocol::CrossDataset => (&k.0, &k.1, &k.3, k.4, k.5) == (&key.0, &key.1, &key.3, key.4, key.5) && k.2 != key.2,
        Protocol::CrossSource => (&k.0, &k.1, &k.2, k.4, k.5) == (&key.0, &key.1, &key.2, key.4, key.5) && k.3 != key.3,
        Protocol::PerDataset => false,
    };
    let held_in: Vec<ScoredPopulation> = groups
        .iter()
        .filter(|(k, p)| peer(k) && p.validate().is_ok())
        .map(|(_, p)| p.clone())
        .collect();
    if held_in.is_empty() {
        log::warn!("{protocol}: nothing to fit a threshold on for {}/{}; acc is NaN", key.2, key.3);
        return Ok(f64::NAN);
    }
    Ok(transfer_threshold(&held_in, std::slice::from_ref(pop), protocol)?[0].accuracy)
}

fn file_name(key: &Key) -> String {
    let raw = format!("{}_{}_{}_{}_K{}_M{}", key.0, key.1, key.2, key.3, key.4, key.5);
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect::<String>()
        + ".csv"
}

pub fn run(args: EvalArgs) -> CliResult<()> {
    let protocol: Protocol = args.protocol.parse()?;
    let groups = populations(&args)?;
    if let Some(dir) = &args.roc_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::new();
    for (key, pop) in &groups {
        if let Err(e) = pop.validate() {
            log::warn!("skipping {}/{}/{}/{}: {e}", key.0, key.1, key.2, key.3);
            continue;
        }
        let acc = match protocol {
            Protocol::PerDataset => best_threshold(std::slice::from_ref(pop), protocol)?.accuracy,
            _ => transferred(key, pop, &groups, protocol)?,
        };
        if let Some(dir) = &args.roc_dir {
            let f = std::fs::File::create(dir.join(file_name(key)))?;
            write_roc_csv(&roc_curve(pop)?, std::io::BufWriter::new(f))?;
        }
        rows.push(ReportRow {
            method: key.0.clone(),
            estimator: key.1.clone(),
            dataset: key.2.clone(),
            source: key.3.clone(),
            k: key.4,
            m: key.5,
            auroc: auroc(pop)?,
            acc,
            tpr_at_1: tpr_at_fpr(pop, 0.01)?,
            tpr_at_10: tpr_at_fpr(pop, 0.10)?,
        });
    }
    if rows.is_empty() {
        return Err(glimpse::Error::EmptyPopulation.into());
    }
    write_report_csv(&rows, output(args.out.as_deref())?)?;
    Ok(())
}
