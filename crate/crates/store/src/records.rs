//! On-disk formats of everything besides model documents and blobs.

use std::collections::BTreeSet;

use gallery_core::access::{ModelRole, User};
use gallery_core::time::{format_timestamp, parse_timestamp, Timestamp};
use gallery_core::workflow::{AuditEvent, Notification};
use gallery_core::xml::Element;
use gallery_core::ModelKey;

use crate::error::{Result, StoreError};

fn corrupt(what: &str, detail: impl std::fmt::Display) -> StoreError {
    StoreError::Corrupt(format!("{what}: {detail}"))
}

fn attr<'a>(el: &'a Element, name: &str, what: &str) -> Result<&'a str> {
    el.attr(name).ok_or_else(|| corrupt(what, format!("<{}> lacks @{name}", el.name)))
}

fn parse_root(text: &str, name: &str) -> Result<Element> {
    let root = Element::parse(text).map_err(|e| corrupt(name, e))?;
    if root.name != name {
        return Err(corrupt(name, format!("root is <{}>", root.name)));
    }
    Ok(root)
}

pub fn meta_to_xml(schema: u32) -> String {
    Element::new("store").with_attr("schema", schema.to_string()).to_canonical_string()
}

pub fn meta_from_xml(text: &str) -> Result<u32> {
    let root = parse_root(text, "store")?;
    attr(&root, "schema", "meta.xml")?.parse().map_err(|e| corrupt("meta.xml", e))
}

pub fn users_to_xml<'a>(users: impl IntoIterator<Item = &'a User>) -> String {
    let mut root = Element::new("users");
    for u in users {
        root.children.push(
            Element::new("user")
                .with_attr("name", u.username.clone())
                .with_attr("display-name", u.display_name.clone())
                .with_attr("email", u.email.clone())
                .with_attr("role", u.global_role.as_str())
                .with_attr("hash", u.password_hash.clone()),
        );
    }
    root.to_canonical_string()
}

pub fn users_from_xml(text: &str) -> Result<Vec<User>> {
    let root = parse_root(text, "users")?;
    root.children_named("user")
        .map(|u| {
            let role = attr(u, "role", "users.xml")?.parse()?;
            Ok(User::new(
                attr(u, "name", "users.xml")?,
                attr(u, "display-name", "users.xml")?,
                attr(u, "email", "users.xml")?,
                role,
                attr(u, "hash", "users.xml")?.to_owned(),
            )?)
        })
        .collect()
}

pub fn acl_to_xml(owners: &BTreeSet<String>, editors: &BTreeSet<String>) -> String {
    let mut root = Element::new("acl");
    for (role, names) in [(ModelRole::Owner, owners), (ModelRole::Editor, editors)] {
        for n in names {
            root.children.push(Element::new(role.as_str()).with_text(n.clone()));
        }
    }
    root.to_canonical_string()
}

pub fn acl_from_xml(text: &str) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    let root = parse_root(text, "acl")?;
    let names = |role: ModelRole| root.children_named(role.as_str()).map(|e| e.text.clone()).collect();
    Ok((names(ModelRole::Owner), names(ModelRole::Editor)))
}

/// One line of `audit.log`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditRecord {
    Transition(AuditEvent),
    /// The model was deleted; earlier lines for its key no longer apply.
    Deleted { key: ModelKey, actor: String, at: Timestamp },
}

const DELETED: &str = "deleted";

/// Tab-separated: time, key, version, actor, from, to, then the review text
/// as a JSON string (`""` when there is none).
pub fn audit_line(r: &AuditRecord) -> String {
    match r {
        AuditRecord::Transition(e) => format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            format_timestamp(&e.at),
            e.key,
            e.version,
            e.actor,
            e.from_status,
            e.to_status,
            serde_json::Value::String(e.review_text.clone().unwrap_or_default()),
        ),
        AuditRecord::Deleted { key, actor, at } => {
            format!("{}\t{key}\t0\t{actor}\t{DELETED}\t{DELETED}\t\"\"", format_timestamp(at))
        }
    }
}

pub fn parse_audit_line(line: &str) -> Result<AuditRecord> {
    let bad = |d: &str| corrupt("audit.log", format!("{d} in {line:?}"));
    let f: Vec<&str> = line.splitn(7, '\t').collect();
    if f.len() != 7 {
        return Err(bad("wrong field count"));
    }
    let at = parse_timestamp(f[0]).ok_or_else(|| bad("bad timestamp"))?;
    let key = ModelKey::new(f[1]).map_err(|_| bad("bad key"))?;
    let actor = f[3].to_owned();
    if f[4] == DELETED {
        return Ok(AuditRecord::Deleted { key, actor, at });
    }
    let text: String = serde_json::from_str(f[6]).map_err(|_| bad("bad review text"))?;
    Ok(AuditRecord::Transition(AuditEvent {
        key,
        version: f[2].parse().map_err(|_| bad("bad version"))?,
        actor,
        from_status: f[4].parse().map_err(|_| bad("bad status"))?,
        to_status: f[5].parse().map_err(|_| bad("bad status"))?,
        review_text: (!text.is_empty()).then_some(text),
        at,
    }))
}

pub fn notifications_to_xml(next_id: u64, items: &[Notification]) -> String {
    let mut root = Element::new("notifications").with_attr("next-id", next_id.to_string());
    for n in items {
        let mut el = Element::new("notification")
            .with_attr("id", n.id.to_string())
            .with_attr("recipient", n.recipient.clone())
            .with_attr("key", n.key.as_str())
            .with_attr("version", n.version.to_string())
            .with_attr("event", n.event.as_str())
            .with_attr("at", format_timestamp(&n.at))
            .with_attr("read", n.read.to_string());
        if let Some(t) = &n.review_text {
            el = el.with_text(t.clone());
        }
        root.children.push(el);
    }
    root.to_canonical_string()
}

pub fn notifications_from_xml(text: &str) -> Result<(u64, Vec<Notification>)> {
    const W: &str = "notifications.xml";
    let root = parse_root(text, "notifications")?;
    let next_id = attr(&root, "next-id", W)?.parse().map_err(|e| corrupt(W, e))?;
    let items = root
        .children_named("notification")
        .map(|n| {
            Ok(Notification {
                id: attr(n, "id", W)?.parse().map_err(|e| corrupt(W, e))?,
                recipient: attr(n, "recipient", W)?.to_owned(),
                key: ModelKey::new(attr(n, "key", W)?)?,
                version: attr(n, "version", W)?.parse().map_err(|e| corrupt(W, e))?,
                event: attr(n, "event", W)?.parse()?,
                review_text: (!n.text.is_empty()).then(|| n.text.clone()),
                at: parse_timestamp(attr(n, "at", W)?).ok_or_else(|| corrupt(W, "bad timestamp"))?,
                read: attr(n, "read", W)? == "true",
            })
        })
        .collect::<Result<_>>()?;
    Ok((next_id, items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gallery_core::access::GlobalRole;
    use gallery_core::workflow::NoticeKind;
    use gallery_core::Status;

    fn at() -> Timestamp {
        parse_timestamp("2021-03-04T05:06:07Z").unwrap()
    }

    #[test]
    fn audit_lines_round_trip() {
        let e = AuditEvent {
            key: ModelKey::new("koebe_polyhedra").unwrap(),
            version: 3,
            actor: "rita".into(),
            from_status: Status::Pending,
            to_status: Status::Edit,
            review_text: Some("fix\tunits\n\"now\"".into()),
            at: at(),
        };
        let line = audit_line(&AuditRecord::Transition(e.clone()));
        assert_eq!(
            line,
            "2021-03-04T05:06:07Z\tkoebe_polyhedra\t3\trita\tpending\tedit\t\"fix\\tunits\\n\\\"now\\\"\""
        );
        assert!(!line.contains('\n'));
        assert_eq!(parse_audit_line(&line).unwrap(), AuditRecord::Transition(e.clone()));

        let quiet = AuditEvent { review_text: None, ..e };
        let line = audit_line(&AuditRecord::Transition(quiet.clone()));
        assert!(line.ends_with("\tedit\t\"\""));
        assert_eq!(parse_audit_line(&line).unwrap(), AuditRecord::Transition(quiet));

        let d = AuditRecord::Deleted { key: ModelKey::new("abc").unwrap(), actor: "root".into(), at: at() };
        assert_eq!(parse_audit_line(&audit_line(&d)).unwrap(), d);
        assert!(parse_audit_line("garbage").is_err());
    }

    #[test]
    fn users_and_acl_round_trip() {
        let u = User::new("olga", "Olga K.", "olga@example.org", GlobalRole::Reviewer, "$2b$10$abc".into()).unwrap();
        assert_eq!(users_from_xml(&users_to_xml([&u])).unwrap(), vec![u]);
        let owners = BTreeSet::from(["a".to_owned(), "b".to_owned()]);
        let editors = BTreeSet::from(["c".to_owned()]);
        assert_eq!(acl_from_xml(&acl_to_xml(&owners, &editors)).unwrap(), (owners, editors));
        assert_eq!(meta_from_xml(&meta_to_xml(2)).unwrap(), 2);
        assert_eq!(meta_to_xml(1), "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<store schema=\"1\"/>\n");
    }

    #[test]
    fn notifications_round_trip() {
        let n = Notification {
            id: 7,
            recipient: "olga".into(),
            key: ModelKey::new("abc").unwrap(),
            version: 2,
            event: NoticeKind::SentBack,
            review_text: Some("fix fig 2".into()),
            at: at(),
            read: false,
        };
        let m = Notification { id: 8, review_text: None, read: true, event: NoticeKind::Submitted, ..n.clone() };
        let xml = notifications_to_xml(9, &[n.clone(), m.clone()]);
        assert_eq!(notifications_from_xml(&xml).unwrap(), (9, vec![n, m]));
    }
}
