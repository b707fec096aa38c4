//! Rating files (`user::item::rating::timestamp` or tab-separated) and the
//! item-to-URI mapping (`item_id<TAB>uri`, extra middle columns ignored).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use lodfm_core::{Error, ItemId, RatingRecord, UserId};

pub fn parse_ratings(text: &str) -> Result<Vec<RatingRecord>, Error> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains("::") {
            line.split("::").collect()
        } else {
            line.split('\t').collect()
        };
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let id = |s: &str, what: &str| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| err(format!("invalid {what} id {s:?}")))
        };
        let user = UserId(id(fields[0], "user")?);
        let item = ItemId(id(fields[1], "item")?);
        let rating: f64 = fields[2]
            .trim()
            .parse()
            .ok()
            .filter(|r: &f64| r.is_finite())
            .ok_or_else(|| err(format!("invalid rating {:?}", fields[2])))?;
        let timestamp: i64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| err(format!("invalid timestamp {:?}", fields[3])))?;
        out.push(RatingRecord {
            user,
            item,
            rating,
            timestamp,
        });
    }
    Ok(out)
}

pub fn load_ratings(path: &Path) -> anyhow::Result<Vec<RatingRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_ratings(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_mapping(text: &str) -> Result<BTreeMap<ItemId, String>, Error> {
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: k + 1, message };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(err("expected item_id<TAB>uri".into()));
        }
        let item = fields[0]
            .trim()
            .parse::<u32>()
            .map(ItemId)
            .map_err(|_| err(format!("invalid item id {:?}", fields[0])))?;
        let uri = fields[fields.len() - 1].trim();
        lodfm_core::query::validate_uri(uri).map_err(|e| err(e.to_string()))?;
        if out.insert(item, uri.to_string()).is_some() {
            return Err(err(format!("item {item} mapped twice")));
        }
    }
    Ok(out)
}

pub fn load_mapping(path: &Path) -> anyhow::Result<BTreeMap<ItemId, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_mapping(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_ratings(records: &[RatingRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{}::{}::{}::{}\n", r.user, r.item, r.rating, r.timestamp))
        .collect()
}

pub fn write_mapping(mapping: &BTreeMap<ItemId, String>) -> String {
    mapping.iter().map(|(i, u)| format!("{i}\t{u}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_separators() {
        let r = parse_ratings("1::2::5::978300760\n3\t4\t2.5\t0\n\n").unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].user, r[0].item, r[0].rating), (UserId(1), ItemId(2), 5.0));
        assert_eq!(r[1].rating, 2.5);
        assert!(parse_ratings("").unwrap().is_empty());
    }

    #[test]
    fn malformed_line_is_named() {
        let e = parse_ratings("1::2::5::0\n1::2::abc::0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e:?}");
        assert!(parse_ratings("1::2::5").is_err());
    }

    #[test]
    fn mapping_formats() {
        let m = parse_mapping("1\thttp://dbpedia.org/resource/Toy_Story\n2\tJumanji (1995)\thttp://dbpedia.org/resource/Jumanji\n").unwrap();
        assert_eq!(m[&ItemId(2)], "http://dbpedia.org/resource/Jumanji");
        assert!(parse_mapping("1\thttp://x/a b\n").is_err());
        assert!(parse_mapping("1\thttp://x/a\n1\thttp://x/b\n").is_err());
    }

    #[test]
    fn writers_round_trip() {
        let text = "1::2::5::9\n";
        assert_eq!(write_ratings(&parse_ratings(text).unwrap()), text);
        let map = "7\thttp://x/y\n";
        assert_eq!(write_mapping(&parse_mapping(map).unwrap()), map);
    }
}
