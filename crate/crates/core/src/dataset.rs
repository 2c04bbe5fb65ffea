//! Ratings, catalog and feature ingestion plus the sparse utility matrix.
//!
//! External user and item ids are remapped to dense 0-based indices in
//! ascending id order, so ordering by index and ordering by id agree.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use csv::{ReaderBuilder, StringRecord, Trim};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MIN_RATING: f64 = 1.0;
pub const MAX_RATING: f64 = 5.0;

/// Which side of the utility matrix an operation runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    User,
    Item,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::User => "user",
            Axis::Item => "item",
        }
    }
}

/// Bijection between sorted external ids and dense indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdMap {
    ids: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl IdMap {
    pub fn from_ids(ids: impl IntoIterator<Item = u64>) -> Self {
        let mut ids: Vec<u64> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        IdMap { ids, index }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, index: usize) -> u64 {
        self.ids[index]
    }

    pub fn index(&self, id: u64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingTriple {
    pub user_id: u64,
    pub item_id: u64,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

impl RatingTriple {
    pub fn new(user_id: u64, item_id: u64, rating: f64) -> Self {
        RatingTriple {
            user_id,
            item_id,
            rating,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    user: usize,
    item: usize,
    rating: f64,
    timestamp: Option<i64>,
}

/// Sparse user × item utility matrix.
///
/// Entries are kept in insertion (file) order as a coordinate list, with a
/// per-user index sorted by item and a per-item index sorted by user.
#[derive(Debug, Clone)]
pub struct RatingMatrix {
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    entries: Vec<Entry>,
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
}

impl RatingMatrix {
    /// Builds a matrix whose dimensions are exactly the distinct ids present.
    pub fn from_triples(triples: Vec<RatingTriple>) -> Result<Self> {
        let users = IdMap::from_ids(triples.iter().map(|t| t.user_id));
        let items = IdMap::from_ids(triples.iter().map(|t| t.item_id));
        Self::with_ids(Arc::new(users), Arc::new(items), triples)
    }

    /// Builds a matrix over fixed id maps; every triple must reference a mapped id.
    pub fn with_ids(
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        triples: Vec<RatingTriple>,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(triples.len());
        for (n, t) in triples.iter().enumerate() {
            check_rating(t.rating, n as u64 + 1)?;
            let user = users.index(t.user_id).ok_or(Error::UnknownUser(t.user_id))?;
            let item = items.index(t.item_id).ok_or(Error::UnknownItem(t.item_id))?;
            entries.push(Entry {
                user,
                item,
                rating: t.rating,
                timestamp: t.timestamp,
            });
        }
        Self::from_entries(users, items, entries, |n| n as u64 + 1)
    }

    fn from_entries(
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        entries: Vec<Entry>,
        line_of: impl Fn(usize) -> u64,
    ) -> Result<Self> {
        let mut by_user = vec![Vec::new(); users.len()];
        let mut by_item = vec![Vec::new(); items.len()];
        for e in &entries {
            by_user[e.user].push((e.item, e.rating));
            by_item[e.item].push((e.user, e.rating));
        }
        for row in by_user.iter_mut() {
            row.sort_unstable_by_key(|&(i, _)| i);
        }
        for col in by_item.iter_mut() {
            col.sort_unstable_by_key(|&(u, _)| u);
        }
        for (u, row) in by_user.iter().enumerate() {
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                let item = w[0].0;
                let n = entries
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.user == u && e.item == item)
                    .map(|(n, _)| n)
                    .nth(1)
                    .unwrap_or(0);
                return Err(Error::DuplicateEntry {
                    line: line_of(n),
                    user_id: users.id(u),
                    item_id: items.id(item),
                });
            }
        }
        Ok(RatingMatrix {
            users,
            items,
            entries,
            by_user,
            by_item,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Number of observed ratings.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    pub fn user_index(&self, user_id: u64) -> Result<usize> {
        self.users.index(user_id).ok_or(Error::UnknownUser(user_id))
    }

    pub fn item_index(&self, item_id: u64) -> Result<usize> {
        self.items.index(item_id).ok_or(Error::UnknownItem(item_id))
    }

    /// Observed `(item index, rating)` pairs of a user, ascending by item.
    pub fn user_row(&self, user: usize) -> &[(usize, f64)] {
        &self.by_user[user]
    }

    /// Observed `(user index, rating)` pairs of an item, ascending by user.
    pub fn item_column(&self, item: usize) -> &[(usize, f64)] {
        &self.by_item[item]
    }

    pub fn get(&self, user: usize, item: usize) -> Option<f64> {
        let row = &self.by_user[user];
        row.binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|pos| row[pos].1)
    }

    pub fn get_by_id(&self, user_id: u64, item_id: u64) -> Option<f64> {
        let user = self.users.index(user_id)?;
        let item = self.items.index(item_id)?;
        self.get(user, item)
    }

    /// Triples in insertion order.
    pub fn triples(&self) -> impl Iterator<Item = RatingTriple> + '_ {
        self.entries.iter().map(|e| RatingTriple {
            user_id: self.users.id(e.user),
            item_id: self.items.id(e.item),
            rating: e.rating,
            timestamp: e.timestamp,
        })
    }

    /// `(user index, item index, rating)` in insertion order.
    pub fn indexed_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|e| (e.user, e.item, e.rating))
    }

    pub fn user_mean(&self, user: usize) -> Option<f64> {
        mean(&self.by_user[user])
    }

    pub fn item_mean(&self, item: usize) -> Option<f64> {
        mean(&self.by_item[item])
    }

    /// Mean over all observed ratings; the scale midpoint when empty.
    pub fn global_mean(&self) -> f64 {
        if self.entries.is_empty() {
            return (MIN_RATING + MAX_RATING) / 2.0;
        }
        self.entries.iter().map(|e| e.rating).sum::<f64>() / self.entries.len() as f64
    }

    /// Row-major dense rendering with `None` for unobserved cells.
    pub fn dense(&self) -> Vec<Vec<Option<f64>>> {
        let mut out = vec![vec![None; self.n_items()]; self.n_users()];
        for e in &self.entries {
            out[e.user][e.item] = Some(e.rating);
        }
        out
    }

    /// Swaps the roles of users and items.
    pub fn transpose(&self) -> RatingMatrix {
        let entries = self
            .entries
            .iter()
            .map(|e| Entry {
                user: e.item,
                item: e.user,
                ..*e
            })
            .collect();
        RatingMatrix {
            users: Arc::clone(&self.items),
            items: Arc::clone(&self.users),
            entries,
            by_user: self.by_item.clone(),
            by_item: self.by_user.clone(),
        }
    }

    /// Keeps only the ratings of users accepted by `keep`, re-deriving dimensions.
    pub fn retain_users(&self, keep: impl Fn(u64) -> bool) -> Result<RatingMatrix> {
        RatingMatrix::from_triples(self.triples().filter(|t| keep(t.user_id)).collect())
    }

    /// Writes the matrix in the ratings CSV format, entries in insertion order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "userId,movieId,rating,timestamp")?;
        for t in self.triples() {
            match t.timestamp {
                Some(ts) => writeln!(out, "{},{},{},{}", t.user_id, t.item_id, t.rating, ts)?,
                None => writeln!(out, "{},{},{},", t.user_id, t.item_id, t.rating)?,
            }
        }
        Ok(())
    }
}

fn mean(values: &[(usize, f64)]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().map(|&(_, r)| r).sum::<f64>() / values.len() as f64)
    }
}

fn check_rating(rating: f64, line: u64) -> Result<()> {
    if !(MIN_RATING..=MAX_RATING).contains(&rating) {
        return Err(Error::Domain {
            line,
            message: format!("rating {rating} outside [{MIN_RATING}, {MAX_RATING}]"),
        });
    }
    Ok(())
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(source)
}

fn record_line(record: &StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn parse_id(field: &str, what: &str, line: u64) -> Result<u64> {
    let value: i64 = field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} {field:?} is not an integer"),
    })?;
    u64::try_from(value).map_err(|_| Error::Domain {
        line,
        message: format!("{what} {value} is negative"),
    })
}

fn expect_header(header: &StringRecord, expected: &[&str], line: u64) -> Result<()> {
    let ok = header.len() >= expected.len()
        && header
            .iter()
            .zip(expected)
            .all(|(got, want)| got.eq_ignore_ascii_case(want));
    if ok {
        Ok(())
    } else {
        Err(Error::Parse {
            line,
            message: format!(
                "expected header starting with {}, found {}",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        })
    }
}

/// Parses a `userId,movieId,rating,timestamp` file. The timestamp column may be
/// absent from the header, and individual timestamp cells may be empty.
pub fn load_ratings<R: Read>(source: R) -> Result<RatingMatrix> {
    let mut reader = csv_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    expect_header(&header, &["userId", "movieId", "rating"], 1)?;
    let has_timestamp = match header.len() {
        3 => false,
        4 if header[3].eq_ignore_ascii_case("timestamp") => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header userId,movieId,rating,timestamp".into(),
            })
        }
    };
    let arity = header.len();

    let mut triples = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record);
        if record.len() != arity {
            return Err(Error::Parse {
                line,
                message: format!("expected {arity} fields, found {}", record.len()),
            });
        }
        let user_id = parse_id(&record[0], "userId", line)?;
        let item_id = parse_id(&record[1], "movieId", line)?;
        let rating: f64 = record[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("rating {:?} is not numeric", &record[2]),
        })?;
        check_rating(rating, line)?;
        let timestamp = if has_timestamp && !record[3].is_empty() {
            Some(record[3].parse::<i64>().map_err(|_| Error::Parse {
                line,
                message: format!("timestamp {:?} is not an integer", &record[3]),
            })?)
        } else {
            None
        };
        triples.push(RatingTriple {
            user_id,
            item_id,
            rating,
            timestamp,
        });
        lines.push(line);
    }

    let users = Arc::new(IdMap::from_ids(triples.iter().map(|t| t.user_id)));
    let items = Arc::new(IdMap::from_ids(triples.iter().map(|t| t.item_id)));
    let entries = triples
        .iter()
        .map(|t| Entry {
            user: users.index(t.user_id).unwrap(),
            item: items.index(t.item_id).unwrap(),
            rating: t.rating,
            timestamp: t.timestamp,
        })
        .collect();
    RatingMatrix::from_entries(users, items, entries, |n| lines[n])
}

/// Row-centered (or column-centered) view of a [`RatingMatrix`].
///
/// Observed cells hold `rating - mean` along the centering axis; unobserved
/// cells read as 0. Both row and column adjacency are kept together with the
/// Euclidean norm of every row and column.
#[derive(Debug, Clone)]
pub struct CenteredMatrix {
    centering: Axis,
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    rows: Vec<Vec<(usize, f64)>>,
    columns: Vec<Vec<(usize, f64)>>,
    means: Vec<Option<f64>>,
    row_norms: Vec<f64>,
    column_norms: Vec<f64>,
}

/// Subtracts each user's mean rating from that user's observed ratings.
pub fn center_rows(m: &RatingMatrix) -> CenteredMatrix {
    let (means, rows) = center_lines(&m.by_user);
    let mut columns = vec![Vec::new(); m.n_items()];
    for (u, row) in rows.iter().enumerate() {
        for &(i, v) in row {
            columns[i].push((u, v));
        }
    }
    CenteredMatrix::assemble(Axis::User, m, rows, columns, means)
}

/// Subtracts each item's mean rating from that item's observed ratings.
pub fn center_columns(m: &RatingMatrix) -> CenteredMatrix {
    let (means, columns) = center_lines(&m.by_item);
    let mut rows = vec![Vec::new(); m.n_users()];
    for (i, col) in columns.iter().enumerate() {
        for &(u, v) in col {
            rows[u].push((i, v));
        }
    }
    CenteredMatrix::assemble(Axis::Item, m, rows, columns, means)
}

/// Sparse lines (rows or columns) as ascending `(index, value)` lists.
type Lines = Vec<Vec<(usize, f64)>>;

// Computed as (n*r - sum)/n so adding a constant to every rating of a line
// leaves the centered values bit-identical for integer-valued ratings.
fn center_lines(lines: &[Vec<(usize, f64)>]) -> (Vec<Option<f64>>, Lines) {
    lines
        .iter()
        .map(|line| {
            if line.is_empty() {
                return (None, Vec::new());
            }
            let n = line.len() as f64;
            let sum: f64 = line.iter().map(|&(_, r)| r).sum();
            let centered = line.iter().map(|&(j, r)| (j, (n * r - sum) / n)).collect();
            (Some(sum / n), centered)
        })
        .unzip()
}

fn norm(values: &[(usize, f64)]) -> f64 {
    values.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
}

impl CenteredMatrix {
    fn assemble(
        centering: Axis,
        m: &RatingMatrix,
        rows: Vec<Vec<(usize, f64)>>,
        columns: Vec<Vec<(usize, f64)>>,
        means: Vec<Option<f64>>,
    ) -> Self {
        let row_norms = rows.iter().map(|r| norm(r)).collect();
        let column_norms = columns.iter().map(|c| norm(c)).collect();
        CenteredMatrix {
            centering,
            users: Arc::clone(&m.users),
            items: Arc::clone(&m.items),
            rows,
            columns,
            means,
            row_norms,
            column_norms,
        }
    }

    pub fn centering(&self) -> Axis {
        self.centering
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Per-user means (row centering) or per-item means (column centering);
    /// `None` where nothing was observed.
    pub fn means(&self) -> &[Option<f64>] {
        &self.means
    }

    pub fn row(&self, user: usize) -> &[(usize, f64)] {
        &self.rows[user]
    }

    pub fn column(&self, item: usize) -> &[(usize, f64)] {
        &self.columns[item]
    }

    pub fn row_norm(&self, user: usize) -> f64 {
        self.row_norms[user]
    }

    pub fn column_norm(&self, item: usize) -> f64 {
        self.column_norms[item]
    }

    /// Vectors along `axis` (rows for users, columns for items).
    pub(crate) fn lines(&self, axis: Axis) -> &[Vec<(usize, f64)>] {
        match axis {
            Axis::User => &self.rows,
            Axis::Item => &self.columns,
        }
    }

    pub(crate) fn cross_lines(&self, axis: Axis) -> &[Vec<(usize, f64)>] {
        match axis {
            Axis::User => &self.columns,
            Axis::Item => &self.rows,
        }
    }

    pub(crate) fn norms(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::User => &self.row_norms,
            Axis::Item => &self.column_norms,
        }
    }

    pub(crate) fn ids(&self, axis: Axis) -> &IdMap {
        match axis {
            Axis::User => &self.users,
            Axis::Item => &self.items,
        }
    }

    pub fn get(&self, user: usize, item: usize) -> f64 {
        let row = &self.rows[user];
        row.binary_search_by_key(&item, |&(i, _)| i)
            .map(|pos| row[pos].1)
            .unwrap_or(0.0)
    }

    /// Dense rendering; unobserved cells are 0.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_items()]; self.n_users()];
        for (u, row) in self.rows.iter().enumerate() {
            for &(i, v) in row {
                out[u][i] = v;
            }
        }
        out
    }
}

/// Random partition of the observed entries into train and test.
///
/// The test side receives `round_ties_even(test_fraction * len)` entries chosen
/// by a seeded shuffle. Both sides keep the full user and item id maps, and
/// each side preserves the original insertion order.
pub fn holdout_split(
    m: &RatingMatrix,
    test_fraction: f64,
    seed: u64,
) -> Result<(RatingMatrix, RatingMatrix)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if m.is_empty() {
        return Err(Error::Empty("cannot split an empty rating matrix".into()));
    }
    let n_test = (test_fraction * m.len() as f64).round_ties_even() as usize;
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_test = vec![false; m.len()];
    for &idx in &order[..n_test] {
        in_test[idx] = true;
    }
    let mut train = Vec::with_capacity(m.len() - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (e, &t) in m.entries.iter().zip(&in_test) {
        if t {
            test.push(*e);
        } else {
            train.push(*e);
        }
    }
    let build = |entries| {
        RatingMatrix::from_entries(Arc::clone(&m.users), Arc::clone(&m.items), entries, |n| {
            n as u64 + 1
        })
    };
    Ok((build(train)?, build(test)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub title: String,
    pub genres: Vec<String>,
}

/// Titles and genre tags by item id.
#[derive(Debug, Clone, Default)]
pub struct ItemCatalog {
    entries: HashMap<u64, CatalogEntry>,
}

impl ItemCatalog {
    pub fn get(&self, item_id: u64) -> Option<&CatalogEntry> {
        self.entries.get(&item_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, item_id: u64, entry: CatalogEntry) -> Option<CatalogEntry> {
        self.entries.insert(item_id, entry)
    }

    /// Release year parsed from a trailing "(YYYY)" in the title.
    pub fn release_year(&self, item_id: u64) -> Option<i32> {
        let title = self.entries.get(&item_id)?.title.trim_end();
        let open = title.rfind('(')?;
        let inner = title[open + 1..].strip_suffix(')')?;
        if inner.len() == 4 {
            inner.parse().ok()
        } else {
            None
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut ids: Vec<&u64> = self.entries.keys().collect();
        ids.sort_unstable();
        writer
            .write_record(["movieId", "title", "genres"])
            .map_err(csv_error)?;
        for id in ids {
            let e = &self.entries[id];
            writer
                .write_record([id.to_string(), e.title.clone(), e.genres.join("|")])
                .map_err(csv_error)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Parses a `movieId,title,genres` file with pipe-delimited genres.
pub fn load_catalog<R: Read>(source: R) -> Result<ItemCatalog> {
    let mut reader = csv_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    expect_header(&header, &["movieId", "title", "genres"], 1)?;
    let mut catalog = ItemCatalog::default();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let id = parse_id(&record[0], "movieId", line)?;
        let genres = record[2]
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(String::from)
            .collect();
        let entry = CatalogEntry {
            title: record[1].to_string(),
            genres,
        };
        if catalog.insert(id, entry).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate movieId {id}"),
            });
        }
    }
    Ok(catalog)
}

/// Role of a feature column, derived from its header name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Actor,
    Director,
    Genre,
    Country,
}

const GENRES: &[&str] = &[
    "Action",
    "Adventure",
    "Animation",
    "Biography",
    "Children",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Family",
    "Fantasy",
    "Film-Noir",
    "History",
    "Horror",
    "IMAX",
    "Music",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Sport",
    "Thriller",
    "War",
    "Western",
];

impl FeatureKind {
    /// `ActorID-*` and `DirID-*` prefixes mark people; known genre names mark
    /// genres; any other column is a production country.
    pub fn classify(name: &str) -> FeatureKind {
        if name.starts_with("ActorID-") {
            FeatureKind::Actor
        } else if name.starts_with("DirID-") {
            FeatureKind::Director
        } else if GENRES.iter().any(|g| g.eq_ignore_ascii_case(name)) {
            FeatureKind::Genre
        } else {
            FeatureKind::Country
        }
    }
}

/// Binary item × feature matrix.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
    items: IdMap,
    rows: Vec<Vec<u8>>,
}

impl FeatureMatrix {
    /// Builds from `(item id, binary row)` pairs; rows must be 0/1 and match `names` in length.
    pub fn new(names: Vec<String>, rows: Vec<(u64, Vec<u8>)>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Empty("feature list has no columns".into()));
        }
        let items = IdMap::from_ids(rows.iter().map(|(id, _)| *id));
        if items.len() != rows.len() {
            return Err(Error::Config("duplicate item id in feature rows".into()));
        }
        let mut dense = vec![Vec::new(); rows.len()];
        for (n, (id, row)) in rows.into_iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::Dimension {
                    expected: names.len(),
                    actual: row.len(),
                });
            }
            if let Some(bad) = row.iter().find(|&&v| v > 1) {
                return Err(Error::Domain {
                    line: n as u64 + 1,
                    message: format!("feature value {bad} is not binary"),
                });
            }
            dense[items.index(id).unwrap()] = row;
        }
        let kinds = names.iter().map(|n| FeatureKind::classify(n)).collect();
        Ok(FeatureMatrix {
            names,
            kinds,
            items,
            rows: dense,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn item_ids(&self) -> &[u64] {
        self.items.ids()
    }

    pub fn vector(&self, item_id: u64) -> Option<&[u8]> {
        self.items.index(item_id).map(|i| self.rows[i].as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "movieId,{}", self.names.join(","))?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(out, "{}", self.items.id(i))?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Parses a `movieId,<feature names...>` file of 0/1 cells.
pub fn load_features<R: Read>(source: R) -> Result<FeatureMatrix> {
    let mut reader = csv_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    expect_header(&header, &["movieId"], 1)?;
    let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
    if names.is_empty() {
        return Err(Error::Empty("features header lists no feature columns".into()));
    }
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let id = parse_id(&record[0], "movieId", line)?;
        if seen.insert(id, line).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate movieId {id}"),
            });
        }
        let row = record
            .iter()
            .skip(1)
            .map(|cell| match cell {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::Domain {
                    line,
                    message: format!("feature cell {other:?} is not 0 or 1"),
                }),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push((id, row));
    }
    FeatureMatrix::new(names, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE_CSV: &str = "userId,movieId,rating,timestamp\n\
        1,1,5,0\n1,3,4,0\n1,4,4,0\n\
        2,2,5,0\n2,3,4,0\n2,4,1,0\n\
        3,1,3,0\n3,2,3,0\n\
        4,1,1,0\n4,2,4,0\n4,4,2,0\n";

    fn example_ratings() -> RatingMatrix {
        load_ratings(EXAMPLE_CSV.as_bytes()).unwrap()
    }

    #[test]
    fn single_row() {
        let m = load_ratings("userId,movieId,rating,timestamp\n1,1193,5,978300760\n".as_bytes())
            .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get_by_id(1, 1193), Some(5.0));
        assert_eq!(m.triples().next().unwrap().timestamp, Some(978300760));
    }

    #[test]
    fn example_dense_rendering() {
        let m = example_ratings();
        assert_eq!((m.n_users(), m.n_items(), m.len()), (4, 4, 11));
        let expected = vec![
            vec![Some(5.0), None, Some(4.0), Some(4.0)],
            vec![None, Some(5.0), Some(4.0), Some(1.0)],
            vec![Some(3.0), Some(3.0), None, None],
            vec![Some(1.0), Some(4.0), None, Some(2.0)],
        ];
        assert_eq!(m.dense(), expected);
    }

    #[test]
    fn out_of_range_rating() {
        let err = load_ratings("userId,movieId,rating,timestamp\n1,1193,9,0\n".as_bytes());
        assert!(matches!(err, Err(Error::Domain { line: 2, .. })), "{err:?}");
    }

    #[test]
    fn malformed_rows_report_line() {
        let csv = "userId,movieId,rating,timestamp\n1,2,3,0\n1,3,x,0\n";
        assert!(matches!(
            load_ratings(csv.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        let csv = "userId,movieId,rating,timestamp\n1,2,3,0\n1,3\n";
        assert!(matches!(
            load_ratings(csv.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn duplicate_pair_is_rejected() {
        let csv = "userId,movieId,rating,timestamp\n1,2,3,0\n1,3,4,0\n1,2,5,0\n";
        match load_ratings(csv.as_bytes()) {
            Err(Error::DuplicateEntry {
                line,
                user_id,
                item_id,
            }) => assert_eq!((line, user_id, item_id), (4, 1, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crlf_and_missing_timestamp_column() {
        let m = load_ratings("userId,movieId,rating\r\n7,9,3.5\r\n".as_bytes()).unwrap();
        assert_eq!(m.get_by_id(7, 9), Some(3.5));
    }

    #[test]
    fn example_centering() {
        let c = center_rows(&example_ratings());
        let expected = [
            [0.67, 0.0, -0.33, -0.33],
            [0.0, 1.67, 0.67, -2.33],
            [0.0, 0.0, 0.0, 0.0],
            [-1.33, 1.67, 0.0, -0.33],
        ];
        for (got, want) in c.dense().iter().zip(expected) {
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 0.005, "{g} vs {w}");
            }
        }
        assert_eq!(c.means()[2], Some(3.0));
        assert_eq!(c.row_norm(2), 0.0);
    }

    #[test]
    fn single_rating_centers_to_zero() {
        let m = RatingMatrix::from_triples(vec![RatingTriple::new(1, 1, 4.0)]).unwrap();
        let c = center_rows(&m);
        assert_eq!(c.row(0), &[(0, 0.0)]);
        assert_eq!(c.means()[0], Some(4.0));
    }

    #[test]
    fn column_centering_matches_transposed_row_centering() {
        let m = example_ratings();
        let a = center_columns(&m).dense();
        let b = center_rows(&m.transpose()).dense();
        for u in 0..4 {
            for i in 0..4 {
                assert_eq!(a[u][i], b[i][u]);
            }
        }
    }

    #[test]
    fn split_counts_and_dimensions() {
        let m = example_ratings();
        let (train, test) = holdout_split(&m, 0.25, 3).unwrap();
        // 0.25 * 11 = 2.75 rounds to 3
        assert_eq!((train.len(), test.len()), (8, 3));
        assert_eq!(train.n_users(), 4);
        assert_eq!(test.n_items(), 4);
    }

    #[test]
    fn split_rounds_half_to_even() {
        let triples: Vec<_> = (0..10).map(|i| RatingTriple::new(i / 3, i, 3.0)).collect();
        let m = RatingMatrix::from_triples(triples).unwrap();
        let (train, test) = holdout_split(&m, 0.25, 0).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let triples: Vec<_> = (0..6).map(|i| RatingTriple::new(i, i, 3.0)).collect();
        let m = RatingMatrix::from_triples(triples).unwrap();
        let (_, test) = holdout_split(&m, 0.25, 0).unwrap();
        assert_eq!(test.len(), 2); // 1.5 -> 2
    }

    #[test]
    fn split_rejects_bad_input() {
        let m = example_ratings();
        assert!(matches!(holdout_split(&m, 1.5, 0), Err(Error::Config(_))));
        assert!(matches!(holdout_split(&m, 0.0, 0), Err(Error::Config(_))));
        let empty = RatingMatrix::from_triples(Vec::new()).unwrap();
        assert!(matches!(holdout_split(&empty, 0.25, 0), Err(Error::Empty(_))));
    }

    const TWO_ACTORS_CSV: &str = "movieId,ActorID-A,ActorID-B\n1,1,0\n2,1,0\n3,0,1\n4,0,1\n5,0,1\n";

    #[test]
    fn two_actor_features() {
        let f = load_features(TWO_ACTORS_CSV.as_bytes()).unwrap();
        assert_eq!(f.vector(1), Some(&[1u8, 0][..]));
        assert_eq!(f.vector(3), Some(&[0u8, 1][..]));
        assert_eq!(f.kinds(), &[FeatureKind::Actor, FeatureKind::Actor]);
    }

    #[test]
    fn feature_errors() {
        assert!(matches!(
            load_features("movieId\n1\n".as_bytes()),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            load_features("movieId,Drama\n1,2\n".as_bytes()),
            Err(Error::Domain { line: 2, .. })
        ));
        assert!(matches!(
            load_features("movieId,Drama,USA\n1,1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn feature_kinds() {
        assert_eq!(FeatureKind::classify("DirID-3"), FeatureKind::Director);
        assert_eq!(FeatureKind::classify("Sci-Fi"), FeatureKind::Genre);
        assert_eq!(FeatureKind::classify("Belgium"), FeatureKind::Country);
    }

    #[test]
    fn catalog_parsing_and_year() {
        let csv = "movieId,title,genres\n296,Pulp Fiction (1994),Comedy|Crime|Drama|Thriller\n\
                   5,\"Page Turner, The (2006)\",Drama\n";
        let c = load_catalog(csv.as_bytes()).unwrap();
        assert_eq!(c.get(296).unwrap().genres.len(), 4);
        assert_eq!(c.get(5).unwrap().title, "Page Turner, The (2006)");
        assert_eq!(c.release_year(296), Some(1994));
    }
}
