//! Submission and review.
//!
//! Transitions flip the status of the latest version in place and produce an
//! [`AuditEvent`]; only content edits and reopening create versions.
//!
//! ```text
//! edit --submit--> pending --approve--> approved --reopen--> (new version) edit
//!                     |  \--send back--> edit
//!                     \----reject-----> rejected (terminal)
//! ```

use std::fmt;
use std::str::FromStr;

use crate::access::{permit, Action, User};
use crate::error::{Error, Result};
use crate::model::{append_edit, successor, Content, ModelHistory, ModelKey, ModelVersion, Status};
use crate::schema::{validate_version, BlobCatalog};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictKind {
    Approve,
    SendBack,
    Reject,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Approve => "approve",
            VerdictKind::SendBack => "send_back",
            VerdictKind::Reject => "reject",
        }
    }

    fn target(self) -> Status {
        match self {
            VerdictKind::Approve => Status::Approved,
            VerdictKind::SendBack => Status::Edit,
            VerdictKind::Reject => Status::Rejected,
        }
    }

    fn notice(self) -> NoticeKind {
        match self {
            VerdictKind::Approve => NoticeKind::Approved,
            VerdictKind::SendBack => NoticeKind::SentBack,
            VerdictKind::Reject => NoticeKind::Rejected,
        }
    }
}

impl FromStr for VerdictKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approve" => Ok(VerdictKind::Approve),
            "send_back" => Ok(VerdictKind::SendBack),
            "reject" => Ok(VerdictKind::Reject),
            _ => Err(Error::Malformed(format!("unknown verdict {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub review_text: String,
}

impl Verdict {
    pub fn new(kind: VerdictKind, review_text: impl Into<String>) -> Self {
        Self { kind, review_text: review_text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEvent {
    pub key: ModelKey,
    pub version: u32,
    pub actor: String,
    pub from_status: Status,
    pub to_status: Status,
    pub review_text: Option<String>,
    pub at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoticeKind {
    Submitted,
    Approved,
    SentBack,
    Rejected,
}

impl NoticeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoticeKind::Submitted => "submitted",
            NoticeKind::Approved => "approved",
            NoticeKind::SentBack => "sent_back",
            NoticeKind::Rejected => "rejected",
        }
    }
}

impl fmt::Display for NoticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [NoticeKind::Submitted, NoticeKind::Approved, NoticeKind::SentBack, NoticeKind::Rejected]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Malformed(format!("unknown notification kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notification {
    pub id: u64,
    pub recipient: String,
    pub key: ModelKey,
    pub version: u32,
    pub event: NoticeKind,
    pub review_text: Option<String>,
    pub at: Timestamp,
    pub read: bool,
}

/// Result of a status change: what to log and whom to tell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub event: AuditEvent,
    pub notice: NoticeKind,
    pub recipients: Vec<String>,
}

impl Transition {
    /// Unread notifications for every recipient; ids are assigned by the caller.
    pub fn notifications(&self, mut next_id: impl FnMut() -> u64) -> Vec<Notification> {
        self.recipients
            .iter()
            .map(|r| Notification {
                id: next_id(),
                recipient: r.clone(),
                key: self.event.key.clone(),
                version: self.event.version,
                event: self.notice,
                review_text: self.event.review_text.clone(),
                at: self.event.at,
                read: false,
            })
            .collect()
    }
}

pub fn is_legal_edge(from: Status, to: Status) -> bool {
    use Status::*;
    matches!(
        (from, to),
        (Edit, Pending) | (Pending, Approved) | (Pending, Edit) | (Pending, Rejected) | (Approved, Edit)
    )
}

fn require_state(history: &ModelHistory, expected: Status) -> Result<()> {
    let s = history.latest().status;
    if s == expected {
        Ok(())
    } else {
        Err(Error::IllegalState(s))
    }
}

fn require_permit(actor: &User, history: &ModelHistory, action: Action) -> Result<()> {
    if permit(Some(actor), history, history.latest().version, action) {
        Ok(())
    } else {
        Err(Error::Forbidden)
    }
}

fn event(history: &ModelHistory, actor: &User, from: Status, review_text: Option<String>, at: Timestamp) -> AuditEvent {
    let latest = history.latest();
    AuditEvent {
        key: history.key.clone(),
        version: latest.version,
        actor: actor.username.clone(),
        from_status: from,
        to_status: latest.status,
        review_text,
        at,
    }
}

/// Move the latest version from edit to pending. Every reviewer is told.
pub fn submit(
    history: &mut ModelHistory,
    actor: &User,
    reviewers: impl IntoIterator<Item = String>,
    blobs: &dyn BlobCatalog,
    now: Timestamp,
) -> Result<Transition> {
    require_state(history, Status::Edit)?;
    require_permit(actor, history, Action::Submit)?;
    let report = validate_version(history.latest(), blobs);
    if !report.is_valid() {
        return Err(Error::ValidationFailed(Box::new(report)));
    }
    history.latest_mut().status = Status::Pending;
    let mut recipients: Vec<String> = reviewers.into_iter().collect();
    recipients.sort();
    recipients.dedup();
    Ok(Transition { event: event(history, actor, Status::Edit, None, now), notice: NoticeKind::Submitted, recipients })
}

/// Apply a reviewer's verdict to the pending latest version. Owners and
/// editors are told, with the review text.
pub fn review(history: &mut ModelHistory, actor: &User, verdict: Verdict, now: Timestamp) -> Result<Transition> {
    require_state(history, Status::Pending)?;
    require_permit(actor, history, Action::Review)?;
    if verdict.review_text.trim().is_empty() {
        return Err(Error::EmptyReviewText);
    }
    history.latest_mut().status = verdict.kind.target();
    let mut recipients: Vec<String> = history.owners.iter().chain(&history.editors).cloned().collect();
    recipients.sort();
    recipients.dedup();
    Ok(Transition {
        event: event(history, actor, Status::Pending, Some(verdict.review_text), now),
        notice: verdict.kind.notice(),
        recipients,
    })
}

/// Start a new editable version from the approved latest one. The approved
/// version stays public.
pub fn reopen(history: &mut ModelHistory, actor: &User, now: Timestamp) -> Result<(ModelVersion, AuditEvent)> {
    require_state(history, Status::Approved)?;
    require_permit(actor, history, Action::Reopen)?;
    let latest = history.latest();
    let next = successor(latest, &actor.username, Status::Edit, latest.content(), now);
    let at = next.created_at;
    history.versions.push(next.clone());
    Ok((next, event(history, actor, Status::Approved, None, at)))
}

/// Append a content version on behalf of `actor`. Published and rejected
/// versions refuse edits from everyone, admins included.
pub fn edit<'h>(
    history: &'h mut ModelHistory,
    actor: &User,
    content: Content,
    now: Timestamp,
    blobs: &dyn BlobCatalog,
) -> Result<&'h ModelVersion> {
    let s = history.latest().status;
    if matches!(s, Status::Approved | Status::Rejected) {
        return Err(Error::ForbiddenState(s));
    }
    require_permit(actor, history, Action::Write)?;
    append_edit(history, &actor.username, content, now, blobs)
}

pub fn authorize_delete(actor: &User, history: &ModelHistory) -> Result<()> {
    require_permit(actor, history, Action::Delete)
}

/// Rebuild every version's status from the audit trail of one model.
///
/// A new version starts in the final status of its predecessor (version 1
/// starts in edit); events then apply in order to the version they name.
pub fn replay_statuses(version_count: u32, events: &[AuditEvent]) -> Result<Vec<Status>, String> {
    let mut statuses: Vec<Status> = Vec::with_capacity(version_count as usize);
    for n in 1..=version_count {
        let mut s = statuses.last().copied().unwrap_or(Status::Edit);
        for e in events.iter().filter(|e| e.version == n) {
            if e.from_status != s {
                return Err(format!("v{n}: event from {} but version is {s}", e.from_status));
            }
            if !is_legal_edge(e.from_status, e.to_status) {
                return Err(format!("v{n}: illegal edge {} -> {}", e.from_status, e.to_status));
            }
            s = e.to_status;
        }
        statuses.push(s);
    }
    if let Some(e) = events.iter().find(|e| e.version == 0 || e.version > version_count) {
        return Err(format!("event names unknown version {}", e.version));
    }
    Ok(statuses)
}
