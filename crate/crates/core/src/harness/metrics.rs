use std::fmt::Write as _;

/// One measurement row. `None` fields are written as empty cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRecord {
    pub run_id: String,
    pub phase: String,
    pub epoch: Option<usize>,
    pub channel: Option<String>,
    pub snr_db: Option<f64>,
    pub compression_ratio: Option<f64>,
    pub sigma_n2: Option<f64>,
    pub loss_total: Option<f64>,
    pub loss_on: Option<f64>,
    pub loss_off: Option<f64>,
    pub cosine_sim: Option<f64>,
    pub cosine_sim_std: Option<f64>,
    pub diag_mean: Option<f64>,
    pub offdiag_abs_mean: Option<f64>,
    pub accuracy: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub f1: Option<f64>,
    pub f1_std: Option<f64>,
}

/// Schema tag written on the first line of every metrics file.
pub const METRICS_SCHEMA: &str = "scgir-metrics/v1";

pub const METRICS_HEADER: &str = "run_id,phase,epoch,channel,snr_db,compression_ratio,sigma_n2,loss_total,loss_on,loss_off,cosine_sim,cosine_sim_std,diag_mean,offdiag_abs_mean,accuracy,accuracy_std,f1,f1_std";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRecord {
    pub fn new(run_id: &str, phase: &str) -> Self {
        MetricsRecord {
            run_id: run_id.to_string(),
            phase: phase.to_string(),
            ..Default::default()
        }
    }

    pub fn to_csv_row(&self) -> String {
        [
            self.run_id.clone(),
            self.phase.clone(),
            self.epoch.map(|e| e.to_string()).unwrap_or_default(),
            self.channel.clone().unwrap_or_default(),
            cell(self.snr_db),
            cell(self.compression_ratio),
            cell(self.sigma_n2),
            cell(self.loss_total),
            cell(self.loss_on),
            cell(self.loss_off),
            cell(self.cosine_sim),
            cell(self.cosine_sim_std),
            cell(self.diag_mean),
            cell(self.offdiag_abs_mean),
            cell(self.accuracy),
            cell(self.accuracy_std),
            cell(self.f1),
            cell(self.f1_std),
        ]
        .join(",")
    }
}

/// Renders records as CSV: a schema/digest comment line, the header, one row each.
pub fn metrics_csv(records: &[MetricsRecord], config_digest: &str) -> String {
    let mut out = String::new();
    writeln!(out, "# {METRICS_SCHEMA} config_digest={config_digest}").unwrap();
    writeln!(out, "{METRICS_HEADER}").unwrap();
    for r in records {
        writeln!(out, "{}", r.to_csv_row()).unwrap();
    }
    out
}
