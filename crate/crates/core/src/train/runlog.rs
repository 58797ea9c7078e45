use std::fmt::Write as _;

pub const RUNLOG_COLUMNS: &str = "epoch,train_loss,train_acc,val_loss,val_acc,mse";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    /// Validation MSE when a validation split exists, training MSE otherwise.
    pub mse: Option<f64>,
    /// Wall-clock; not part of the CSV so that logs stay reproducible.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// Fixed column order; absent monitors are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RUNLOG_COLUMNS);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                field(r.train_acc),
                field(r.val_loss),
                field(r.val_acc),
                field(r.mse)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(RUNLOG_COLUMNS) {
            return Err("unexpected run log header".into());
        }
        let opt = |s: &str| -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| format!("bad number `{s}`"))
            }
        };
        let mut records = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(format!("expected 6 columns: {line}"));
            }
            records.push(EpochRecord {
                epoch: f[0].parse().map_err(|_| format!("bad epoch `{}`", f[0]))?,
                train_loss: f[1].parse().map_err(|_| format!("bad loss `{}`", f[1]))?,
                train_acc: opt(f[2])?,
                val_loss: opt(f[3])?,
                val_acc: opt(f[4])?,
                mse: opt(f[5])?,
                seconds: 0.0,
            });
        }
        Ok(Self { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let log = RunLog {
            records: vec![
                EpochRecord {
                    epoch: 1,
                    train_loss: 0.6931471805599453,
                    train_acc: Some(0.5),
                    val_loss: None,
                    val_acc: None,
                    mse: Some(0.25),
                    seconds: 0.0,
                },
                EpochRecord {
                    epoch: 2,
                    train_loss: 0.1,
                    train_acc: Some(0.9),
                    val_loss: Some(0.2),
                    val_acc: Some(0.8),
                    mse: None,
                    seconds: 0.0,
                },
            ],
        };
        let csv = log.to_csv();
        assert!(csv.starts_with("epoch,train_loss,train_acc,val_loss,val_acc,mse\n1,"));
        assert_eq!(RunLog::from_csv(&csv).unwrap(), log);
    }
}
