//! Raga to rasa mapping, song manifests, stratified splits and feature scaling.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown raga {name:?}{}", row_suffix(*.row))]
    UnknownRaga { name: String, row: Option<usize> },
    #[error("unknown rasa {0:?}")]
    UnknownRasa(String),
    #[error("bad genre {genre:?} on manifest row {row}")]
    BadGenre { genre: String, row: usize },
    #[error("duplicate song id {id:?} on manifest row {row}")]
    DuplicateId { id: String, row: usize },
    #[error("manifest header must be `id,path,title,raga,language,genre`, found `{0}`")]
    BadHeader(String),
    #[error("rasa {rasa} has {count} record(s); at least 2 are needed to split")]
    ClassTooSmall { rasa: Rasa, count: usize },
    #[error("validation fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("need at least {needed} rows, got {got}")]
    NotEnoughRows { needed: usize, got: usize },
    #[error("manifest row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn row_suffix(row: Option<usize>) -> String {
    row.map(|r| format!(" on manifest row {r}")).unwrap_or_default()
}

/// The six moods in scope, in the fixed order used for class indices and tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rasa {
    Adhbhutha,
    Haasya,
    Karuna,
    Shantha,
    Shringara,
    Veera,
}

impl Rasa {
    pub const ALL: [Rasa; 6] = [
        Rasa::Adhbhutha,
        Rasa::Haasya,
        Rasa::Karuna,
        Rasa::Shantha,
        Rasa::Shringara,
        Rasa::Veera,
    ];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Rasa> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Rasa::Adhbhutha => "Adhbhutha",
            Rasa::Haasya => "Haasya",
            Rasa::Karuna => "Karuna",
            Rasa::Shantha => "Shantha",
            Rasa::Shringara => "Shringara",
            Rasa::Veera => "Veera",
        }
    }
}

impl fmt::Display for Rasa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rasa {
    type Err = CatalogError;

    /// Case-insensitive; also accepts the spellings Adhbbhutha, Adbutha, Hasya and Sringara.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize(s);
        let rasa = match key.as_str() {
            "adhbhutha" | "adhbbhutha" | "adbutha" => Rasa::Adhbhutha,
            "haasya" | "hasya" => Rasa::Haasya,
            "karuna" => Rasa::Karuna,
            "shantha" => Rasa::Shantha,
            "shringara" | "sringara" => Rasa::Shringara,
            "veera" => Rasa::Veera,
            _ => return Err(CatalogError::UnknownRasa(s.to_string())),
        };
        Ok(rasa)
    }
}

/// Lowercase with whitespace and hyphens removed.
fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace() && *c != '-')
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RagaEntry {
    pub name: &'static str,
    pub rasa: Rasa,
    pub aliases: &'static [&'static str],
}

const fn raga(name: &'static str, rasa: Rasa) -> RagaEntry {
    RagaEntry {
        name,
        rasa,
        aliases: &[],
    }
}

const fn raga_aka(
    name: &'static str,
    rasa: Rasa,
    aliases: &'static [&'static str],
) -> RagaEntry {
    RagaEntry {
        name,
        rasa,
        aliases,
    }
}

/// Expert raga/rasa association, one row per raga.
pub const RAGA_TABLE: [RagaEntry; 35] = [
    raga_aka("Abheri/Bhimpalasi", Rasa::Adhbhutha, &["Abheri", "Bhimpalasi"]),
    raga("Arabhi", Rasa::Adhbhutha),
    raga("Desh", Rasa::Adhbhutha),
    raga("Hindola", Rasa::Adhbhutha),
    raga("Malayamarutham", Rasa::Adhbhutha),
    raga("Aathana", Rasa::Haasya),
    raga("Kunthalavarali", Rasa::Haasya),
    raga("Reethigowla", Rasa::Haasya),
    raga("Shankarabharanam", Rasa::Haasya),
    raga("Ahibhairav", Rasa::Karuna),
    raga("Bageshri", Rasa::Karuna),
    raga("kanada", Rasa::Karuna),
    raga("Lalith", Rasa::Karuna),
    raga("madhuvanti", Rasa::Karuna),
    raga("Punnagavarali", Rasa::Karuna),
    raga("Shivaranjani", Rasa::Karuna),
    raga("Shubhapanthuvarali", Rasa::Karuna),
    raga_aka("Kalavathi/valachi", Rasa::Shantha, &["Kalavathi", "valachi"]),
    raga("Mayamalavagowla", Rasa::Shantha),
    raga("Sama", Rasa::Shantha),
    raga_aka("Shuddha Saveri - Durga", Rasa::Shantha, &["Shuddha Saveri", "Durga"]),
    raga("Sindhu Bhairavi", Rasa::Shantha),
    raga("Yadhukula kambhodhi", Rasa::Shantha),
    raga("Behaag", Rasa::Shringara),
    raga("Brindavani", Rasa::Shringara),
    raga("Kalyani", Rasa::Shringara),
    raga("Kamas", Rasa::Shringara),
    raga("Kapi", Rasa::Shringara),
    raga("Karaharapriya", Rasa::Shringara),
    raga("Pahaadi", Rasa::Shringara),
    raga("YamanKalyani", Rasa::Shringara),
    raga("Kedaragowla", Rasa::Veera),
    raga("Madhyamavathi", Rasa::Veera),
    raga("Meghamalhaar", Rasa::Veera),
    raga("Mohana", Rasa::Veera),
];

/// Alias-aware lookup over [`RAGA_TABLE`].
#[derive(Debug)]
pub struct RagaTable {
    index: HashMap<String, usize>,
}

impl RagaTable {
    pub fn standard() -> &'static RagaTable {
        static TABLE: OnceLock<RagaTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let mut index = HashMap::new();
            for (i, entry) in RAGA_TABLE.iter().enumerate() {
                for name in std::iter::once(&entry.name).chain(entry.aliases) {
                    let previous = index.insert(normalize(name), i);
                    assert!(previous.is_none(), "raga name {name:?} registered twice");
                }
            }
            RagaTable { index }
        })
    }

    pub fn entries(&self) -> &'static [RagaEntry] {
        &RAGA_TABLE
    }

    pub fn lookup(&self, name: &str) -> Option<&'static RagaEntry> {
        self.index.get(&normalize(name)).map(|&i| &RAGA_TABLE[i])
    }
}

/// Resolves a raga name (or alias) to its rasa; unknown names are an error, never a guess.
pub fn rasa_for_raga(name: &str) -> Result<Rasa, CatalogError> {
    RagaTable::standard()
        .lookup(name)
        .map(|e| e.rasa)
        .ok_or_else(|| CatalogError::UnknownRaga {
            name: name.to_string(),
            row: None,
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Genre {
    #[serde(rename = "Folk/Album")]
    FolkAlbum,
    #[serde(rename = "Indian Classical")]
    IndianClassical,
    Movie,
}

impl Genre {
    pub fn label(self) -> &'static str {
        match self {
            Genre::FolkAlbum => "Folk/Album",
            Genre::IndianClassical => "Indian Classical",
            Genre::Movie => "Movie",
        }
    }
}

impl FromStr for Genre {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Folk/Album" => Ok(Genre::FolkAlbum),
            "Indian Classical" => Ok(Genre::IndianClassical),
            "Movie" => Ok(Genre::Movie),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SongRecord {
    pub id: String,
    pub path: PathBuf,
    pub title: String,
    pub raga: String,
    pub language: String,
    pub genre: Genre,
    pub rasa: Rasa,
}

#[derive(Debug, Deserialize, Serialize)]
struct ManifestRow {
    id: String,
    path: String,
    title: String,
    raga: String,
    language: String,
    genre: String,
}

pub const MANIFEST_HEADER: [&str; 6] = ["id", "path", "title", "raga", "language", "genre"];

/// Parses manifest CSV. Relative audio paths are joined onto `base_dir`.
pub fn parse_manifest<R: Read>(reader: R, base_dir: &Path) -> Result<Vec<SongRecord>, CatalogError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv
        .headers()
        .map_err(|source| CatalogError::Csv { row: 1, source })?
        .clone();
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(CatalogError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, row) in csv.deserialize::<ManifestRow>().enumerate() {
        // row 1 is the header
        let line = i + 2;
        let row = row.map_err(|source| CatalogError::Csv { row: line, source })?;
        let rasa = rasa_for_raga(&row.raga).map_err(|_| CatalogError::UnknownRaga {
            name: row.raga.clone(),
            row: Some(line),
        })?;
        let genre = row.genre.parse().map_err(|_| CatalogError::BadGenre {
            genre: row.genre.clone(),
            row: line,
        })?;
        if !seen.insert(row.id.clone()) {
            return Err(CatalogError::DuplicateId { id: row.id, row: line });
        }
        let path = PathBuf::from(&row.path);
        records.push(SongRecord {
            path: if path.is_relative() { base_dir.join(path) } else { path },
            id: row.id,
            title: row.title,
            raga: row.raga,
            language: row.language,
            genre,
            rasa,
        });
    }
    Ok(records)
}

pub fn load_manifest(path: &Path) -> Result<Vec<SongRecord>, CatalogError> {
    let file = std::fs::File::open(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(file, base)
}

/// Writes manifest CSV; paths are written as stored (relative to the caller's choice of base).
pub fn write_manifest<W: Write>(writer: W, records: &[SongRecord]) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for r in records {
        csv.serialize(ManifestRow {
            id: r.id.clone(),
            path: r.path.to_string_lossy().into_owned(),
            title: r.title.clone(),
            raga: r.raga.clone(),
            language: r.language.clone(),
            genre: r.genre.label().to_string(),
        })?;
    }
    csv.flush()?;
    Ok(())
}

/// Row indices of a train/validation partition, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Split {
    /// `id,role` CSV, one line per id in input order.
    pub fn to_csv(&self, ids: &[String]) -> String {
        let mut roles = vec![""; ids.len()];
        for &i in &self.train {
            roles[i] = "train";
        }
        for &i in &self.validation {
            roles[i] = "validation";
        }
        let mut out = String::from("id,role\n");
        for (id, role) in ids.iter().zip(roles) {
            out.push_str(&format!("{id},{role}\n"));
        }
        out
    }
}

/// Seeded per-rasa split. Each class contributes `round(fraction * size)`
/// validation rows, clamped so both sides keep at least one row.
pub fn stratified_split(labels: &[Rasa], val_fraction: f64, seed: u64) -> Result<Split, CatalogError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(CatalogError::BadFraction(val_fraction));
    }
    let mut by_class: BTreeMap<Rasa, Vec<usize>> = BTreeMap::new();
    for (i, &rasa) in labels.iter().enumerate() {
        by_class.entry(rasa).or_default().push(i);
    }
    if let Some((&rasa, rows)) = by_class.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(CatalogError::ClassTooSmall {
            rasa,
            count: rows.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for rows in by_class.values_mut() {
        rows.shuffle(&mut rng);
        let n_val = ((val_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        validation.extend_from_slice(&rows[..n_val]);
        train.extend_from_slice(&rows[n_val..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok(Split { train, validation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    #[default]
    Zscore,
    Minmax,
}

impl FromStr for ScalerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zscore" | "standard" => Ok(ScalerKind::Zscore),
            "minmax" => Ok(ScalerKind::Minmax),
            other => Err(format!("unknown scaler {other:?} (expected zscore or minmax)")),
        }
    }
}

impl fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalerKind::Zscore => "zscore",
            ScalerKind::Minmax => "minmax",
        })
    }
}

/// Per-feature affine map `(x - offset) / scale` fitted on training rows.
///
/// A feature whose training values are all equal is degenerate and maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub kind: ScalerKind,
    pub offset: Vec<f64>,
    /// Zero marks a degenerate feature.
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(&x, (&o, &s))| if s == 0.0 { 0.0 } else { (x - o) / s })
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

/// Fits z-score (population std) or min-max statistics on `train`.
pub fn fit_scaler(kind: ScalerKind, train: &[Vec<f64>]) -> Result<Scaler, CatalogError> {
    if train.len() < 2 {
        return Err(CatalogError::NotEnoughRows {
            needed: 2,
            got: train.len(),
        });
    }
    let dim = train[0].len();
    let n = train.len() as f64;
    let mut offset = Vec::with_capacity(dim);
    let mut scale = Vec::with_capacity(dim);
    for j in 0..dim {
        let col = || train.iter().map(move |r| r[j]);
        let lo = col().fold(f64::INFINITY, f64::min);
        let hi = col().fold(f64::NEG_INFINITY, f64::max);
        let degenerate = lo == hi;
        match kind {
            ScalerKind::Zscore => {
                let mean = col().sum::<f64>() / n;
                let var = col().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                offset.push(mean);
                scale.push(if degenerate { 0.0 } else { var.sqrt() });
            }
            ScalerKind::Minmax => {
                offset.push(lo);
                scale.push(if degenerate { 0.0 } else { hi - lo });
            }
        }
    }
    Ok(Scaler { kind, offset, scale })
}

pub fn apply_scaler(scaler: &Scaler, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
    scaler.apply(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raga_examples() {
        assert_eq!(rasa_for_raga("Mohana").unwrap(), Rasa::Veera);
        assert_eq!(rasa_for_raga("bhimpalasi").unwrap(), Rasa::Adhbhutha);
        assert_eq!(rasa_for_raga("Kalyani").unwrap(), Rasa::Shringara);
        assert_eq!(rasa_for_raga("yaman kalyani").unwrap(), Rasa::Shringara);
        assert_eq!(rasa_for_raga("Shuddha-Saveri").unwrap(), Rasa::Shantha);
        assert!(matches!(
            rasa_for_raga("Todi"),
            Err(CatalogError::UnknownRaga { .. })
        ));
    }

    #[test]
    fn table_shape() {
        assert_eq!(RAGA_TABLE.len(), 35);
        let counts = Rasa::ALL.map(|r| RAGA_TABLE.iter().filter(|e| e.rasa == r).count());
        assert_eq!(counts, [5, 4, 8, 6, 8, 4]);
        // forces the uniqueness assertion in the index builder
        assert!(RagaTable::standard().lookup("Sama").is_some());
    }

    #[test]
    fn rasa_parsing() {
        assert_eq!("adhbbhutha".parse::<Rasa>().unwrap(), Rasa::Adhbhutha);
        assert_eq!("SHANTHA".parse::<Rasa>().unwrap(), Rasa::Shantha);
        assert!("Raudra".parse::<Rasa>().is_err());
        for r in Rasa::ALL {
            assert_eq!(r.name().parse::<Rasa>().unwrap(), r);
            assert_eq!(Rasa::from_index(r.index()), Some(r));
        }
    }

    const HEADER: &str = "id,path,title,raga,language,genre\n";

    #[test]
    fn manifest_rows() {
        let csv = format!("{HEADER}s1,a.wav,Song,Kalyani,Tamil,Movie\n");
        let recs = parse_manifest(csv.as_bytes(), Path::new("/data")).unwrap();
        assert_eq!(recs[0].rasa, Rasa::Shringara);
        assert_eq!(recs[0].path, PathBuf::from("/data/a.wav"));

        let csv = format!("{HEADER}s1,a.wav,Song,Kalyani,Tamil,Podcast\n");
        assert!(matches!(
            parse_manifest(csv.as_bytes(), Path::new(".")),
            Err(CatalogError::BadGenre { row: 2, .. })
        ));

        let csv = format!("{HEADER}s1,a.wav,A,Kalyani,Tamil,Movie\ns1,b.wav,B,Mohana,Hindi,Movie\n");
        assert!(matches!(
            parse_manifest(csv.as_bytes(), Path::new(".")),
            Err(CatalogError::DuplicateId { row: 3, .. })
        ));

        let csv = format!("{HEADER}s1,a.wav,A,Todi,Tamil,Movie\n");
        assert!(matches!(
            parse_manifest(csv.as_bytes(), Path::new(".")),
            Err(CatalogError::UnknownRaga { row: Some(2), .. })
        ));

        let csv = "id,path,title,rasa\n";
        assert!(matches!(
            parse_manifest(csv.as_bytes(), Path::new(".")),
            Err(CatalogError::BadHeader(_))
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let csv = format!(
            "{HEADER}s1,a.wav,\"Song, with comma\",Durga,Kannada,Indian Classical\ns2,b.wav,B,Desh,Hindi,Folk/Album\n"
        );
        let recs = parse_manifest(csv.as_bytes(), Path::new("")).unwrap();
        let mut out = Vec::new();
        write_manifest(&mut out, &recs).unwrap();
        let again = parse_manifest(out.as_slice(), Path::new("")).unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn split_counts_and_determinism() {
        let labels: Vec<Rasa> = (0..100).map(|i| Rasa::ALL[i % 5]).collect();
        let a = stratified_split(&labels, 0.2, 7).unwrap();
        for r in &Rasa::ALL[..5] {
            assert_eq!(a.validation.iter().filter(|&&i| labels[i] == *r).count(), 4);
        }
        assert_eq!(a, stratified_split(&labels, 0.2, 7).unwrap());
        assert_ne!(a, stratified_split(&labels, 0.2, 8).unwrap());

        let mut small = labels.clone();
        small.push(Rasa::Veera);
        assert!(matches!(
            stratified_split(&small, 0.2, 7),
            Err(CatalogError::ClassTooSmall { rasa: Rasa::Veera, count: 1 })
        ));
        assert!(stratified_split(&labels, 1.0, 7).is_err());

        let csv = a.to_csv(&(0..100).map(|i| format!("s{i}")).collect::<Vec<_>>());
        assert_eq!(csv.lines().count(), 101);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",train") || l.ends_with(",validation")));
    }

    #[test]
    fn scaler_examples() {
        let z = fit_scaler(ScalerKind::Zscore, &[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(z.offset, vec![2.0]);
        assert_eq!(z.scale, vec![1.0]);
        assert_eq!(z.apply_row(&[2.0]), vec![0.0]);

        let m = fit_scaler(ScalerKind::Minmax, &[vec![0.0], vec![10.0]]).unwrap();
        assert_eq!(m.apply_row(&[5.0]), vec![0.5]);

        for kind in [ScalerKind::Zscore, ScalerKind::Minmax] {
            let s = fit_scaler(kind, &[vec![0.1], vec![0.1], vec![0.1]]).unwrap();
            assert_eq!(apply_scaler(&s, &[vec![0.1], vec![7.0]]), vec![vec![0.0], vec![0.0]]);
        }
        assert!(fit_scaler(ScalerKind::Zscore, &[vec![1.0]]).is_err());
    }
}
