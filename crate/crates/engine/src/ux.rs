//! Subjective-evaluation instruments and scoring.
//!
//! Two instruments, both on a three-point scale where each answer is −1, 0,
//! or +1:
//!
//! * an engagement/preference rating of seven questions, collected once per
//!   exercise setting and reported as per-question response distributions;
//! * a user-experience scale of seven bipolar aspects (e.g. boring ↔
//!   exciting), reported as per-aspect means rounded half-away-from-zero to
//!   two decimals.
//!
//! Question and aspect wording lives in a JSON data file so the instruments
//! can be revised without code changes; a default definition is embedded.

use serde::{Deserialize, Serialize};
use std::io::Read;

pub const QUESTION_COUNT: usize = 7;

#[derive(Debug, thiserror::Error)]
pub enum UxError {
    #[error("no responses given")]
    EmptyResponses,
    #[error("row {row}: answer {value} is not -1, 0, or +1")]
    BadAnswer { row: usize, value: i64 },
    #[error("row {row}: expected {QUESTION_COUNT} answers, got {got}")]
    WrongAnswerCount { row: usize, got: usize },
    #[error("row {row}: unknown setting `{value}` (expected 1 or 2)")]
    BadSetting { row: usize, value: String },
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("instrument definition: {0}")]
    BadDefinition(String),
}

/// Which exercise setting an engagement response was collected under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    Setting1,
    Setting2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngagementResponse {
    pub participant_id: String,
    pub setting: Setting,
    pub answers: [i8; QUESTION_COUNT],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipolarResponse {
    pub participant_id: String,
    pub answers: [i8; QUESTION_COUNT],
}

/// Instrument wording, editable as data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSet {
    pub engagement: EngagementInstrument,
    pub bipolar: BipolarInstrument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementInstrument {
    pub questions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipolarInstrument {
    pub aspects: Vec<AspectPair>,
}

/// One bipolar aspect: −1 leans `negative`, +1 leans `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectPair {
    pub negative: String,
    pub positive: String,
}

impl InstrumentSet {
    /// The built-in instrument definitions.
    pub fn default_set() -> InstrumentSet {
        serde_json::from_str(include_str!("../assets/instruments.json"))
            .expect("embedded instrument definitions parse")
    }

    pub fn from_json(json: &str) -> Result<InstrumentSet, UxError> {
        let set: InstrumentSet =
            serde_json::from_str(json).map_err(|e| UxError::BadDefinition(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), UxError> {
        if self.engagement.questions.len() != QUESTION_COUNT {
            return Err(UxError::BadDefinition(format!(
                "expected {QUESTION_COUNT} engagement questions, got {}",
                self.engagement.questions.len()
            )));
        }
        if self.bipolar.aspects.len() != QUESTION_COUNT {
            return Err(UxError::BadDefinition(format!(
                "expected {QUESTION_COUNT} bipolar aspects, got {}",
                self.bipolar.aspects.len()
            )));
        }
        Ok(())
    }
}

/// Rounds half-away-from-zero to two decimals, e.g. 2/3 → 0.67, −2/3 → −0.67.
fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Per-aspect arithmetic means over bipolar responses, rounded to two
/// decimals half-away-from-zero.
pub fn aspect_means(responses: &[BipolarResponse]) -> Result<[f64; QUESTION_COUNT], UxError> {
    if responses.is_empty() {
        return Err(UxError::EmptyResponses);
    }
    let n = responses.len() as f64;
    let mut means = [0.0; QUESTION_COUNT];
    for (aspect, mean) in means.iter_mut().enumerate() {
        let sum: i64 = responses.iter().map(|r| r.answers[aspect] as i64).sum();
        *mean = round2(sum as f64 / n);
    }
    Ok(means)
}

/// Per-question counts of (−1, 0, +1) answers for one setting.
pub fn response_distribution(
    responses: &[EngagementResponse],
    setting: Setting,
) -> Result<[[u32; 3]; QUESTION_COUNT], UxError> {
    let selected: Vec<&EngagementResponse> =
        responses.iter().filter(|r| r.setting == setting).collect();
    if selected.is_empty() {
        return Err(UxError::EmptyResponses);
    }
    let mut counts = [[0u32; 3]; QUESTION_COUNT];
    for response in selected {
        for (question, &answer) in response.answers.iter().enumerate() {
            counts[question][(answer + 1) as usize] += 1;
        }
    }
    Ok(counts)
}

fn parse_answer(field: &str, row: usize) -> Result<i8, UxError> {
    let value: i64 = field
        .trim()
        .parse()
        .map_err(|_| UxError::BadRow {
            row,
            reason: format!("answer `{field}` is not an integer"),
        })?;
    if !(-1..=1).contains(&value) {
        return Err(UxError::BadAnswer { row, value });
    }
    Ok(value as i8)
}

fn answers_from<'a>(
    fields: impl Iterator<Item = &'a str>,
    row: usize,
) -> Result<[i8; QUESTION_COUNT], UxError> {
    let parsed: Vec<i8> = fields
        .map(|f| parse_answer(f, row))
        .collect::<Result<_, _>>()?;
    let got = parsed.len();
    parsed
        .try_into()
        .map_err(|_| UxError::WrongAnswerCount { row, got })
}

/// Reads engagement responses from CSV with header
/// `participant_id,setting,q1..q7` (setting is `1` or `2`).
pub fn read_engagement_csv(reader: impl Read) -> Result<Vec<EngagementResponse>, UxError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (idx, record) in csv_reader.records().enumerate() {
        let row = idx + 2; // header is line 1
        let record = record?;
        if record.len() != QUESTION_COUNT + 2 {
            return Err(UxError::BadRow {
                row,
                reason: format!("expected {} columns, got {}", QUESTION_COUNT + 2, record.len()),
            });
        }
        let setting = match record[1].trim() {
            "1" => Setting::Setting1,
            "2" => Setting::Setting2,
            other => {
                return Err(UxError::BadSetting {
                    row,
                    value: other.to_string(),
                })
            }
        };
        out.push(EngagementResponse {
            participant_id: record[0].trim().to_string(),
            setting,
            answers: answers_from(record.iter().skip(2), row)?,
        });
    }
    if out.is_empty() {
        return Err(UxError::EmptyResponses);
    }
    Ok(out)
}

/// Reads bipolar responses from CSV with header `participant_id,q1..q7`.
/// A `setting` column, if present, is ignored (the instrument is collected
/// once per participant).
pub fn read_bipolar_csv(reader: impl Read) -> Result<Vec<BipolarResponse>, UxError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let skip = if headers
        .iter()
        .nth(1)
        .is_some_and(|h| h.trim().eq_ignore_ascii_case("setting"))
    {
        2
    } else {
        1
    };
    let mut out = Vec::new();
    for (idx, record) in csv_reader.records().enumerate() {
        let row = idx + 2;
        let record = record?;
        if record.len() != QUESTION_COUNT + skip {
            return Err(UxError::BadRow {
                row,
                reason: format!(
                    "expected {} columns, got {}",
                    QUESTION_COUNT + skip,
                    record.len()
                ),
            });
        }
        out.push(BipolarResponse {
            participant_id: record[0].trim().to_string(),
            answers: answers_from(record.iter().skip(skip), row)?,
        });
    }
    if out.is_empty() {
        return Err(UxError::EmptyResponses);
    }
    Ok(out)
}

/// Bipolar score table as CSV: `aspect,negative,positive,mean`.
pub fn bipolar_csv(instrument: &BipolarInstrument, means: &[f64; QUESTION_COUNT]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["aspect", "negative", "positive", "mean"])
        .expect("csv header");
    for (i, aspect) in instrument.aspects.iter().enumerate() {
        w.write_record([
            &(i + 1).to_string(),
            &aspect.negative,
            &aspect.positive,
            &format!("{:.2}", means[i]),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8 csv")
}

/// Engagement distribution table as CSV:
/// `setting,question,label,minus,zero,plus`.
pub fn engagement_csv(
    instrument: &EngagementInstrument,
    setting: Setting,
    counts: &[[u32; 3]; QUESTION_COUNT],
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["setting", "question", "label", "minus", "zero", "plus"])
        .expect("csv header");
    let setting_label = match setting {
        Setting::Setting1 => "1",
        Setting::Setting2 => "2",
    };
    for (i, label) in instrument.questions.iter().enumerate() {
        w.write_record([
            setting_label,
            &(i + 1).to_string(),
            label,
            &counts[i][0].to_string(),
            &counts[i][1].to_string(),
            &counts[i][2].to_string(),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8 csv")
}
