use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::signal_io::Command;

/// Row order of the accuracy table: the published table lists Stop before
/// the translations.
pub const TABLE_ORDER: [Command; 5] = [
    Command::Left,
    Command::Right,
    Command::Stop,
    Command::Forward,
    Command::Reverse,
];

/// 5×5 counts, rows = truth, columns = prediction, in [`Command`] order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 5]; 5],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Command, Command)>) -> Self {
        let mut m = Self::new();
        for (t, p) in pairs {
            m.record(t, p);
        }
        m
    }

    pub fn record(&mut self, truth: Command, predicted: Command) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self, cmd: Command) -> u64 {
        self.counts[cmd.index()][cmd.index()]
    }

    pub fn row_total(&self, cmd: Command) -> u64 {
        self.counts[cmd.index()].iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..5).map(|i| self.counts[i][i]).sum()
    }

    /// trace / total; 0 for an empty matrix.
    pub fn overall_accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    /// diagonal / row sum; `None` for commands absent from the test set.
    pub fn command_accuracy(&self, cmd: Command) -> Option<f64> {
        let n = self.row_total(cmd);
        (n > 0).then(|| self.correct(cmd) as f64 / n as f64)
    }

    /// Per-command counts and accuracies followed by the overall accuracy,
    /// laid out like the published accuracy table.
    pub fn render_table(&self) -> String {
        let totals: Vec<u64> = TABLE_ORDER.iter().map(|&c| self.row_total(c)).collect();
        let present: Vec<u64> = totals.iter().copied().filter(|&n| n > 0).collect();
        let uniform = present.windows(2).all(|w| w[0] == w[1]);
        let count_header = match (uniform, present.first()) {
            (true, Some(n)) => format!("Number of correct trials out of {n}"),
            _ => "Number of correct trials".to_string(),
        };
        let width = count_header.len();
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:<w$}  Accuracy", "Commands", count_header, w = width);
        for &c in &TABLE_ORDER {
            let n = self.row_total(c);
            let count = if uniform {
                self.correct(c).to_string()
            } else {
                format!("{}/{}", self.correct(c), n)
            };
            let acc = self.command_accuracy(c).map_or("-".to_string(), percent);
            let _ = writeln!(out, "{:<16}{:<w$}  {}", title_case(c), count, acc, w = width);
        }
        let _ = writeln!(
            out,
            "{:<16}{:<w$}  {}",
            "Overall Accuracy",
            "",
            percent(self.overall_accuracy()),
            w = width
        );
        out
    }

    /// Machine-readable twin of [`render_table`](Self::render_table).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("command,correct,total,accuracy\n");
        for &c in &TABLE_ORDER {
            let acc = self.command_accuracy(c).map_or(String::new(), |a| format!("{a}"));
            let _ = writeln!(out, "{},{},{},{}", c.token(), self.correct(c), self.row_total(c), acc);
        }
        let _ = writeln!(
            out,
            "OVERALL,{},{},{}",
            self.trace(),
            self.total(),
            self.overall_accuracy()
        );
        out
    }

    /// Full truth × prediction grid as CSV.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for c in Command::ALL {
            out.push(',');
            out.push_str(c.token());
        }
        out.push('\n');
        for t in Command::ALL {
            out.push_str(t.token());
            for p in Command::ALL {
                let _ = write!(out, ",{}", self.counts[t.index()][p.index()]);
            }
            out.push('\n');
        }
        out
    }
}

/// "70%" for whole percentages, one decimal otherwise.
pub fn percent(fraction: f64) -> String {
    let p = fraction * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{:.0}%", p.round())
    } else {
        format!("{p:.1}%")
    }
}

fn title_case(c: Command) -> &'static str {
    match c {
        Command::Left => "Left",
        Command::Right => "Right",
        Command::Forward => "Forward",
        Command::Reverse => "Reverse",
        Command::Stop => "Stop",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_correct(correct: [(Command, u64); 5], per_row: u64) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::new();
        for (c, k) in correct {
            for _ in 0..k {
                m.record(c, c);
            }
            // misses go to the next command in order
            let wrong = Command::ALL[(c.index() + 1) % 5];
            for _ in k..per_row {
                m.record(c, wrong);
            }
        }
        m
    }

    #[test]
    fn published_table_arithmetic() {
        let m = with_correct(
            [
                (Command::Left, 14),
                (Command::Right, 14),
                (Command::Stop, 17),
                (Command::Forward, 13),
                (Command::Reverse, 10),
            ],
            20,
        );
        assert_eq!(m.total(), 100);
        assert_eq!(m.command_accuracy(Command::Left), Some(0.7));
        assert_eq!(m.command_accuracy(Command::Right), Some(0.7));
        assert_eq!(m.command_accuracy(Command::Stop), Some(0.85));
        assert_eq!(m.command_accuracy(Command::Forward), Some(0.65));
        assert_eq!(m.command_accuracy(Command::Reverse), Some(0.5));
        assert!((m.overall_accuracy() - 0.68).abs() < 1e-12);

        let table = m.render_table();
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Commands"));
        assert!(lines[0].contains("Number of correct trials out of 20"));
        assert!(lines[1].starts_with("Left") && lines[1].contains("14") && lines[1].ends_with("70%"));
        assert!(lines[3].starts_with("Stop") && lines[3].ends_with("85%"));
        assert!(lines[5].starts_with("Reverse") && lines[5].ends_with("50%"));
        assert!(lines[6].starts_with("Overall Accuracy") && lines[6].ends_with("68%"));

        let csv = m.to_csv();
        assert!(csv.contains("STOP,17,20,0.85\n"));
        assert!(csv.ends_with("OVERALL,68,100,0.68\n"));
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let perfect = ConfusionMatrix::from_pairs(Command::ALL.iter().flat_map(|&c| [(c, c); 4]));
        assert_eq!(perfect.overall_accuracy(), 1.0);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(perfect.counts[i][j], if i == j { 4 } else { 0 });
            }
        }
        let stop = ConfusionMatrix::from_pairs(Command::ALL.iter().flat_map(|&c| [(c, Command::Stop); 4]));
        assert!((stop.overall_accuracy() - 0.2).abs() < 1e-12);
        assert_eq!(stop.row_total(Command::Left), 4);
    }

    #[test]
    fn uneven_rows_render_fractions() {
        let m = ConfusionMatrix::from_pairs([
            (Command::Left, Command::Left),
            (Command::Stop, Command::Left),
            (Command::Stop, Command::Stop),
        ]);
        let t = m.render_table();
        assert!(t.contains("1/2"));
        assert!(t.lines().any(|l| l.starts_with("Right") && l.ends_with('-')));
    }

    #[test]
    fn percent_format() {
        assert_eq!(percent(0.68), "68%");
        assert_eq!(percent(2.0 / 3.0), "66.7%");
    }
}
