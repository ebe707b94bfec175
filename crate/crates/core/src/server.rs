//! In-memory social platform used as the system under test.
//!
//! Accounts, a follow graph, tweets with retweets, likes and per-user alert
//! queues. [`ServerState::handle_request`] is a pure transition: given the
//! same state, request, clock reading, RNG state and faults it produces the
//! same response and successor state. A request that fails leaves the state
//! untouched.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clock::Clock;
use crate::rng::unit_draw;

/// Default probability that a follow request hits the injected fault.
pub const DEFAULT_FOLLOW_ERROR_PROBABILITY: f64 = 0.2;
/// Alerts a session must receive before the alert navigation fault arms.
pub const DEFAULT_ALERT_NAV_BUG_THRESHOLD: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TweetId(pub u64);

impl core::fmt::Display for TweetId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    Liked,
    Followed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub kind: AlertKind,
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<TweetId>,
    pub ts: i64,
}

/// Seeded defects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultConfig {
    pub follow_error_probability: f64,
    pub alert_nav_bug_enabled: bool,
    pub alert_nav_bug_threshold: u32,
}

impl FaultConfig {
    /// Canonical target: no follow faults, navigation bug off.
    pub const fn none() -> Self {
        Self {
            follow_error_probability: 0.0,
            alert_nav_bug_enabled: false,
            alert_nav_bug_threshold: DEFAULT_ALERT_NAV_BUG_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<(), FaultConfigError> {
        let p = self.follow_error_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(FaultConfigError::Probability(p));
        }
        if self.alert_nav_bug_threshold == 0 {
            return Err(FaultConfigError::Threshold);
        }
        Ok(())
    }
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self {
            follow_error_probability: DEFAULT_FOLLOW_ERROR_PROBABILITY,
            alert_nav_bug_enabled: false,
            alert_nav_bug_threshold: DEFAULT_ALERT_NAV_BUG_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultConfigError {
    #[error("follow_error_probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("alert_nav_bug_threshold must be positive")]
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    pub password_hash: String,
    pub created_ts: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tweet {
    pub id: TweetId,
    pub author: String,
    pub text: String,
    pub media: Option<String>,
    pub parent: Option<TweetId>,
    pub created_ts: i64,
}

/// Requests accepted by the target, one per endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "request", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Signup {
        username: String,
        password: String,
    },
    Login {
        username: String,
        password: String,
    },
    Logout {
        token: String,
    },
    ListUsers {
        token: String,
    },
    Follow {
        token: String,
        username: String,
    },
    Unfollow {
        token: String,
        username: String,
    },
    PostTweet {
        token: String,
        text: String,
        #[serde(default)]
        media: Option<String>,
    },
    Retweet {
        token: String,
        tweet: TweetId,
        text: String,
    },
    Like {
        token: String,
        tweet: TweetId,
    },
    Unlike {
        token: String,
        tweet: TweetId,
    },
    GetFeed {
        token: String,
    },
    GetMyTweets {
        token: String,
    },
    GetRetweetsOf {
        token: String,
        tweet: TweetId,
    },
    WhoLiked {
        token: String,
        tweet: TweetId,
    },
    GetAlerts {
        token: String,
    },
}

impl Request {
    /// Endpoint name, also the `request` tag on the wire.
    pub const fn name(&self) -> &'static str {
        match self {
            Request::Signup { .. } => "signup",
            Request::Login { .. } => "login",
            Request::Logout { .. } => "logout",
            Request::ListUsers { .. } => "list_users",
            Request::Follow { .. } => "follow",
            Request::Unfollow { .. } => "unfollow",
            Request::PostTweet { .. } => "post_tweet",
            Request::Retweet { .. } => "retweet",
            Request::Like { .. } => "like",
            Request::Unlike { .. } => "unlike",
            Request::GetFeed { .. } => "get_feed",
            Request::GetMyTweets { .. } => "get_my_tweets",
            Request::GetRetweetsOf { .. } => "get_retweets_of",
            Request::WhoLiked { .. } => "who_liked",
            Request::GetAlerts { .. } => "get_alerts",
        }
    }

    pub const NAMES: [&'static str; 15] = [
        "signup",
        "login",
        "logout",
        "list_users",
        "follow",
        "unfollow",
        "post_tweet",
        "retweet",
        "like",
        "unlike",
        "get_feed",
        "get_my_tweets",
        "get_retweets_of",
        "who_liked",
        "get_alerts",
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSummary {
    pub username: String,
    pub followers: Vec<String>,
    pub following: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetView {
    pub id: TweetId,
    pub author: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of: Option<TweetId>,
    pub like_count: u32,
    pub liked_by_me: bool,
    pub created_ts: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reply", rename_all = "snake_case")]
pub enum Reply {
    Session { token: String, username: String },
    Done,
    Users { users: Vec<UserSummary> },
    Tweets { tweets: Vec<TweetView> },
    Tweet { tweet: TweetView },
    Likers { usernames: Vec<String> },
    Alerts { alerts: Vec<Alert> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Auth,
    Conflict,
    Internal,
}

impl ErrorKind {
    pub const fn code(self) -> u16 {
        match self {
            ErrorKind::Validation => 400,
            ErrorKind::Auth => 401,
            ErrorKind::Conflict => 409,
            ErrorKind::Internal => 500,
        }
    }
}

/// Error response body: `{code, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: u16,
    pub message: String,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            code: kind.code(),
            message: message.into(),
        }
    }

    /// 5xx: the target failed, as opposed to rejecting the request.
    pub const fn is_internal(&self) -> bool {
        self.code >= 500
    }
}

pub type Response = Result<Reply, ApiError>;

/// Anything that answers target requests: an in-process server, a shared
/// handle to one, or a remote client.
pub trait Backend {
    fn call(&mut self, request: Request) -> Response;
}

impl<B: Backend + ?Sized> Backend for &mut B {
    fn call(&mut self, request: Request) -> Response {
        (**self).call(request)
    }
}

/// Event that may enqueue an alert.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlertEvent {
    Like { liker: String, tweet: TweetId },
    Follow { follower: String, followee: String },
}

/// Follow fault: draws `u` uniform in `[0, 1)` and fails iff `u < p`.
pub fn fault_follow<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> Result<(), ApiError> {
    if unit_draw(rng) < p {
        return Err(ApiError::new(
            ErrorKind::Internal,
            "injected fault: follow handler raised",
        ));
    }
    Ok(())
}

fn hash_password(password: &str) -> String {
    let digest = Sha256::digest(password.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn valid_username(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServerState {
    pub users: BTreeMap<String, Account>,
    /// `(follower, followee)`.
    pub follows: BTreeSet<(String, String)>,
    pub tweets: BTreeMap<TweetId, Tweet>,
    pub likes: BTreeSet<(String, TweetId)>,
    pub alerts: BTreeMap<String, Vec<Alert>>,
    pub tokens: BTreeMap<String, String>,
    next_tweet: u64,
    next_token: u64,
}

impl ServerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alerts_for(&self, user: &str) -> &[Alert] {
        self.alerts.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    fn user_of(&self, token: &str) -> Result<String, ApiError> {
        self.tokens
            .get(token)
            .cloned()
            .ok_or_else(|| ApiError::new(ErrorKind::Auth, "unknown or expired session token"))
    }

    fn require_user(&self, name: &str) -> Result<(), ApiError> {
        if self.users.contains_key(name) {
            Ok(())
        } else {
            Err(ApiError::new(ErrorKind::Validation, format!("no such user `{name}`")))
        }
    }

    fn require_tweet(&self, id: TweetId) -> Result<&Tweet, ApiError> {
        self.tweets
            .get(&id)
            .ok_or_else(|| ApiError::new(ErrorKind::Validation, format!("no such tweet {id}")))
    }

    fn issue_token(&mut self, user: &str) -> String {
        self.next_token += 1;
        let token = format!("tok-{:08x}", self.next_token);
        self.tokens.insert(token.clone(), user.to_string());
        token
    }

    fn view_of(&self, tweet: &Tweet, viewer: &str) -> TweetView {
        let like_count = self.likes.iter().filter(|(_, t)| *t == tweet.id).count() as u32;
        TweetView {
            id: tweet.id,
            author: tweet.author.clone(),
            text: tweet.text.clone(),
            media: tweet.media.clone(),
            retweet_of: tweet.parent,
            like_count,
            liked_by_me: self.likes.contains(&(viewer.to_string(), tweet.id)),
            created_ts: tweet.created_ts,
        }
    }

    /// Newest first; ids are allocated in creation order.
    fn tweets_where(&self, viewer: &str, keep: impl Fn(&Tweet) -> bool) -> Vec<TweetView> {
        self.tweets
            .values()
            .rev()
            .filter(|t| keep(t))
            .map(|t| self.view_of(t, viewer))
            .collect()
    }

    fn post(
        &mut self,
        author: String,
        text: String,
        media: Option<String>,
        parent: Option<TweetId>,
        now: i64,
    ) -> TweetView {
        self.next_tweet += 1;
        let id = TweetId(self.next_tweet);
        let tweet = Tweet {
            id,
            author: author.clone(),
            text,
            media,
            parent,
            created_ts: now,
        };
        let view = self.view_of(&tweet, &author);
        self.tweets.insert(id, tweet);
        view
    }

    /// Enqueues at most one alert for `event`. Self-events produce nothing.
    ///
    /// Callers only pass events whose state change actually happened, so a
    /// like that was already present never reaches this point.
    pub fn generate_alert(&mut self, event: AlertEvent, now: i64) {
        let (recipient, alert) = match event {
            AlertEvent::Like { liker, tweet } => {
                let Some(author) = self.tweets.get(&tweet).map(|t| t.author.clone()) else {
                    return;
                };
                if author == liker {
                    return;
                }
                (
                    author,
                    Alert {
                        kind: AlertKind::Liked,
                        actor: liker,
                        subject: Some(tweet),
                        ts: now,
                    },
                )
            }
            AlertEvent::Follow { follower, followee } => {
                if follower == followee {
                    return;
                }
                (
                    followee,
                    Alert {
                        kind: AlertKind::Followed,
                        actor: follower,
                        subject: None,
                        ts: now,
                    },
                )
            }
        };
        self.alerts.entry(recipient).or_default().push(alert);
    }

    pub fn handle_request<R: RngCore + ?Sized>(
        &mut self,
        request: Request,
        now: i64,
        rng: &mut R,
        faults: &FaultConfig,
    ) -> Response {
        match request {
            Request::Signup { username, password } => {
                if !valid_username(&username) {
                    return Err(ApiError::new(
                        ErrorKind::Validation,
                        "username must be 1-64 characters of [A-Za-z0-9_.-]",
                    ));
                }
                if password.is_empty() {
                    return Err(ApiError::new(ErrorKind::Validation, "password must not be empty"));
                }
                if self.users.contains_key(&username) {
                    return Err(ApiError::new(
                        ErrorKind::Conflict,
                        format!("user `{username}` already exists"),
                    ));
                }
                self.users.insert(
                    username.clone(),
                    Account {
                        password_hash: hash_password(&password),
                        created_ts: now,
                    },
                );
                let token = self.issue_token(&username);
                Ok(Reply::Session { token, username })
            }
            Request::Login { username, password } => {
                let ok = self
                    .users
                    .get(&username)
                    .is_some_and(|a| a.password_hash == hash_password(&password));
                if !ok {
                    return Err(ApiError::new(ErrorKind::Auth, "bad username or password"));
                }
                let token = self.issue_token(&username);
                Ok(Reply::Session { token, username })
            }
            Request::Logout { token } => {
                self.user_of(&token)?;
                self.tokens.remove(&token);
                Ok(Reply::Done)
            }
            Request::ListUsers { token } => {
                self.user_of(&token)?;
                let users = self
                    .users
                    .keys()
                    .map(|name| UserSummary {
                        username: name.clone(),
                        followers: self
                            .follows
                            .iter()
                            .filter(|(_, followee)| followee == name)
                            .map(|(f, _)| f.clone())
                            .collect(),
                        following: self
                            .follows
                            .iter()
                            .filter(|(follower, _)| follower == name)
                            .map(|(_, f)| f.clone())
                            .collect(),
                    })
                    .collect();
                Ok(Reply::Users { users })
            }
            Request::Follow { token, username } => {
                let me = self.user_of(&token)?;
                fault_follow(rng, faults.follow_error_probability)?;
                if me == username {
                    return Err(ApiError::new(ErrorKind::Validation, "cannot follow yourself"));
                }
                self.require_user(&username)?;
                if self.follows.insert((me.clone(), username.clone())) {
                    self.generate_alert(
                        AlertEvent::Follow {
                            follower: me,
                            followee: username,
                        },
                        now,
                    );
                }
                Ok(Reply::Done)
            }
            Request::Unfollow { token, username } => {
                let me = self.user_of(&token)?;
                self.require_user(&username)?;
                self.follows.remove(&(me, username));
                Ok(Reply::Done)
            }
            Request::PostTweet { token, text, media } => {
                let me = self.user_of(&token)?;
                if text.trim().is_empty() {
                    return Err(ApiError::new(ErrorKind::Validation, "tweet text must not be empty"));
                }
                let tweet = self.post(me, text, media, None, now);
                Ok(Reply::Tweet { tweet })
            }
            Request::Retweet { token, tweet, text } => {
                let me = self.user_of(&token)?;
                self.require_tweet(tweet)?;
                let view = self.post(me, text, None, Some(tweet), now);
                Ok(Reply::Tweet { tweet: view })
            }
            Request::Like { token, tweet } => {
                let me = self.user_of(&token)?;
                self.require_tweet(tweet)?;
                if self.likes.insert((me.clone(), tweet)) {
                    self.generate_alert(AlertEvent::Like { liker: me, tweet }, now);
                }
                Ok(Reply::Done)
            }
            Request::Unlike { token, tweet } => {
                let me = self.user_of(&token)?;
                self.require_tweet(tweet)?;
                self.likes.remove(&(me, tweet));
                Ok(Reply::Done)
            }
            Request::GetFeed { token } => {
                let me = self.user_of(&token)?;
                let tweets = self.tweets_where(&me, |t| {
                    t.author == me || self.follows.contains(&(me.clone(), t.author.clone()))
                });
                Ok(Reply::Tweets { tweets })
            }
            Request::GetMyTweets { token } => {
                let me = self.user_of(&token)?;
                let tweets = self.tweets_where(&me, |t| t.author == me);
                Ok(Reply::Tweets { tweets })
            }
            Request::GetRetweetsOf { token, tweet } => {
                let me = self.user_of(&token)?;
                self.require_tweet(tweet)?;
                let tweets = self.tweets_where(&me, |t| t.parent == Some(tweet));
                Ok(Reply::Tweets { tweets })
            }
            Request::WhoLiked { token, tweet } => {
                self.user_of(&token)?;
                self.require_tweet(tweet)?;
                let usernames = self
                    .likes
                    .iter()
                    .filter(|(_, t)| *t == tweet)
                    .map(|(u, _)| u.clone())
                    .collect();
                Ok(Reply::Likers { usernames })
            }
            Request::GetAlerts { token } => {
                let me = self.user_of(&token)?;
                Ok(Reply::Alerts {
                    alerts: self.alerts_for(&me).to_vec(),
                })
            }
        }
    }

    /// Checks the structural invariants; returns a description of the first breach.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (a, b) in &self.follows {
            if a == b {
                return Err(format!("self-follow by `{a}`"));
            }
            if !self.users.contains_key(a) || !self.users.contains_key(b) {
                return Err(format!("follow ({a}, {b}) references unknown user"));
            }
        }
        for (u, t) in &self.likes {
            if !self.tweets.contains_key(t) {
                return Err(format!("like by `{u}` on missing tweet {t}"));
            }
        }
        for tweet in self.tweets.values() {
            // parents are always older, so chains strictly descend and cannot cycle
            if let Some(parent) = tweet.parent {
                if !self.tweets.contains_key(&parent) {
                    return Err(format!("tweet {} retweets missing {parent}", tweet.id));
                }
                if parent >= tweet.id {
                    return Err(format!("tweet {} retweets non-older {parent}", tweet.id));
                }
            }
        }
        for (user, queue) in &self.alerts {
            for alert in queue {
                match (alert.kind, alert.subject) {
                    (AlertKind::Liked, None) => return Err(format!("liked alert for `{user}` without subject")),
                    (AlertKind::Followed, Some(_)) => return Err(format!("followed alert for `{user}` with subject")),
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// A server instance with its own clock, RNG and fault settings.
#[derive(Debug, Clone)]
pub struct LocalServer<R, C> {
    pub state: ServerState,
    pub rng: R,
    pub clock: C,
    pub faults: FaultConfig,
}

impl<R: RngCore, C: Clock> LocalServer<R, C> {
    pub fn new(rng: R, clock: C, faults: FaultConfig) -> Self {
        Self {
            state: ServerState::new(),
            rng,
            clock,
            faults,
        }
    }
}

impl<R: RngCore, C: Clock> Backend for LocalServer<R, C> {
    fn call(&mut self, request: Request) -> Response {
        let now = self.clock.now_ms();
        self.state.handle_request(request, now, &mut self.rng, &self.faults)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::rng::{seeded, SimRng};
    use alloc::vec;
    use proptest::prelude::*;

    type Server = LocalServer<SimRng, VirtualClock>;

    fn server(faults: FaultConfig) -> Server {
        LocalServer::new(seeded(1), VirtualClock::default(), faults)
    }

    fn signup(s: &mut Server, name: &str) -> String {
        match s.call(Request::Signup {
            username: name.into(),
            password: "pw".into(),
        }) {
            Ok(Reply::Session { token, .. }) => token,
            other => panic!("signup failed: {other:?}"),
        }
    }

    fn tweet(s: &mut Server, token: &str, text: &str) -> TweetId {
        match s.call(Request::PostTweet {
            token: token.into(),
            text: text.into(),
            media: None,
        }) {
            Ok(Reply::Tweet { tweet }) => tweet.id,
            other => panic!("post failed: {other:?}"),
        }
    }

    #[test]
    fn follow_shows_up_in_followee_summary() {
        let mut s = server(FaultConfig::none());
        let t1 = signup(&mut s, "u1");
        let t2 = signup(&mut s, "u2");
        s.call(Request::Follow {
            token: t1,
            username: "u2".into(),
        })
        .unwrap();
        let Ok(Reply::Users { users }) = s.call(Request::ListUsers { token: t2 }) else {
            panic!()
        };
        let u2 = users.iter().find(|u| u.username == "u2").unwrap();
        assert_eq!(u2.followers, vec!["u1".to_string()]);
        assert_eq!(s.state.alerts_for("u2").len(), 1);
        assert_eq!(s.state.alerts_for("u2")[0].kind, AlertKind::Followed);
    }

    #[test]
    fn like_records_liker_and_alerts_author() {
        let mut s = server(FaultConfig::none());
        let t1 = signup(&mut s, "u1");
        let t2 = signup(&mut s, "u2");
        let t = tweet(&mut s, &t2, "hello");
        s.call(Request::Like {
            token: t1.clone(),
            tweet: t,
        })
        .unwrap();
        let Ok(Reply::Likers { usernames }) = s.call(Request::WhoLiked { token: t1, tweet: t }) else {
            panic!()
        };
        assert_eq!(usernames, vec!["u1".to_string()]);
        let alerts = s.state.alerts_for("u2");
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].kind, AlertKind::Liked);
        assert_eq!(alerts[0].actor, "u1");
        assert_eq!(alerts[0].subject, Some(t));
    }

    #[test]
    fn certain_follow_fault_leaves_state_unchanged() {
        let mut s = server(FaultConfig {
            follow_error_probability: 1.0,
            ..FaultConfig::none()
        });
        let t1 = signup(&mut s, "u1");
        signup(&mut s, "u2");
        let before = s.state.clone();
        let err = s
            .call(Request::Follow {
                token: t1,
                username: "u2".into(),
            })
            .unwrap_err();
        assert_eq!(err.code, 500);
        assert!(err.is_internal());
        assert_eq!(s.state, before);
    }

    #[test]
    fn error_paths() {
        let mut s = server(FaultConfig::none());
        let t1 = signup(&mut s, "u1");
        let dup = s.call(Request::Signup {
            username: "u1".into(),
            password: "x".into(),
        });
        assert_eq!(dup.unwrap_err().code, 409);
        assert_eq!(s.call(Request::GetFeed { token: "nope".into() }).unwrap_err().code, 401);
        assert_eq!(
            s.call(Request::Follow {
                token: t1.clone(),
                username: "u1".into()
            })
            .unwrap_err()
            .code,
            400
        );
        assert_eq!(
            s.call(Request::Follow {
                token: t1.clone(),
                username: "ghost".into()
            })
            .unwrap_err()
            .code,
            400
        );
        assert_eq!(
            s.call(Request::Like {
                token: t1.clone(),
                tweet: TweetId(99)
            })
            .unwrap_err()
            .code,
            400
        );
        assert_eq!(
            s.call(Request::Login {
                username: "u1".into(),
                password: "wrong".into()
            })
            .unwrap_err()
            .code,
            401
        );
        s.call(Request::Logout { token: t1.clone() }).unwrap();
        assert_eq!(s.call(Request::GetAlerts { token: t1 }).unwrap_err().code, 401);
    }

    #[test]
    fn self_like_produces_no_alert() {
        let mut s = server(FaultConfig::none());
        let t1 = signup(&mut s, "u1");
        let t = tweet(&mut s, &t1, "mine");
        s.call(Request::Like { token: t1, tweet: t }).unwrap();
        assert!(s.state.alerts_for("u1").is_empty());
    }

    #[test]
    fn relike_after_unlike_alerts_again_but_double_like_does_not() {
        // like, like (no change), unlike, like: the state rules give exactly 2 alerts
        let mut s = server(FaultConfig::none());
        let t1 = signup(&mut s, "u1");
        let t2 = signup(&mut s, "u2");
        let t = tweet(&mut s, &t2, "x");
        let like = || Request::Like {
            token: t1.clone(),
            tweet: t,
        };
        s.call(like()).unwrap();
        assert_eq!(s.state.alerts_for("u2").len(), 1);
        s.call(like()).unwrap();
        assert_eq!(s.state.alerts_for("u2").len(), 1);
        s.call(Request::Unlike {
            token: t1.clone(),
            tweet: t,
        })
        .unwrap();
        assert_eq!(s.state.alerts_for("u2").len(), 1);
        s.call(like()).unwrap();
        assert_eq!(s.state.alerts_for("u2").len(), 2);
    }

    #[test]
    fn feed_is_own_and_followees_newest_first() {
        let mut s = server(FaultConfig::none());
        let t1 = signup(&mut s, "u1");
        let t2 = signup(&mut s, "u2");
        let t3 = signup(&mut s, "u3");
        let a = tweet(&mut s, &t1, "a");
        let b = tweet(&mut s, &t2, "b");
        tweet(&mut s, &t3, "c");
        s.call(Request::Follow {
            token: t1.clone(),
            username: "u2".into(),
        })
        .unwrap();
        let r = s
            .call(Request::Retweet {
                token: t1.clone(),
                tweet: b,
                text: "rt".into(),
            })
            .unwrap();
        let Reply::Tweet { tweet: rt } = r else { panic!() };
        assert_eq!(rt.retweet_of, Some(b));
        let Ok(Reply::Tweets { tweets }) = s.call(Request::GetFeed { token: t1.clone() }) else {
            panic!()
        };
        let ids: Vec<_> = tweets.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![rt.id, b, a]);
        let Ok(Reply::Tweets { tweets }) = s.call(Request::GetRetweetsOf { token: t1, tweet: b }) else {
            panic!()
        };
        assert_eq!(tweets.len(), 1);
    }

    #[test]
    fn fault_follow_extremes() {
        let mut rng = seeded(3);
        for _ in 0..1000 {
            assert!(fault_follow(&mut rng, 0.0).is_ok());
            assert!(fault_follow(&mut rng, 1.0).is_err());
        }
    }

    #[test]
    fn fault_follow_rate_matches_probability() {
        // Monte Carlo with a fixed seed: 10,000 draws at p = 0.2
        let mut rng = seeded(20_240_417);
        let errors = (0..10_000).filter(|_| fault_follow(&mut rng, 0.2).is_err()).count();
        let rate = errors as f64 / 10_000.0;
        assert!((rate - 0.2).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn fault_config_validation() {
        assert!(FaultConfig::default().validate().is_ok());
        let bad = FaultConfig {
            follow_error_probability: 1.5,
            ..FaultConfig::default()
        };
        assert_eq!(bad.validate(), Err(FaultConfigError::Probability(1.5)));
        assert_eq!(FaultConfig::default().alert_nav_bug_threshold, 10);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Signup(u8),
        Login(u8),
        Logout(u8),
        Follow(u8, u8),
        Unfollow(u8, u8),
        Post(u8),
        Retweet(u8, u8),
        Like(u8, u8),
        Unlike(u8, u8),
    }

    fn arb_op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u8..4).prop_map(Op::Signup),
            (0u8..4).prop_map(Op::Login),
            (0u8..4).prop_map(Op::Logout),
            (0u8..4, 0u8..4).prop_map(|(a, b)| Op::Follow(a, b)),
            (0u8..4, 0u8..4).prop_map(|(a, b)| Op::Unfollow(a, b)),
            (0u8..4).prop_map(Op::Post),
            (0u8..4, 0u8..8).prop_map(|(a, b)| Op::Retweet(a, b)),
            (0u8..4, 0u8..8).prop_map(|(a, b)| Op::Like(a, b)),
            (0u8..4, 0u8..8).prop_map(|(a, b)| Op::Unlike(a, b)),
        ]
    }

    fn run_ops(ops: &[Op], p: f64) -> (Server, Vec<Response>) {
        let mut s = server(FaultConfig {
            follow_error_probability: p,
            ..FaultConfig::none()
        });
        let mut tokens: BTreeMap<u8, String> = BTreeMap::new();
        let mut responses = Vec::new();
        let name = |u: u8| format!("user{u}");
        let tok = |tokens: &BTreeMap<u8, String>, u: u8| tokens.get(&u).cloned().unwrap_or_default();
        for op in ops {
            let req = match *op {
                Op::Signup(u) => Request::Signup {
                    username: name(u),
                    password: "pw".into(),
                },
                Op::Login(u) => Request::Login {
                    username: name(u),
                    password: "pw".into(),
                },
                Op::Logout(u) => Request::Logout { token: tok(&tokens, u) },
                Op::Follow(a, b) => Request::Follow {
                    token: tok(&tokens, a),
                    username: name(b),
                },
                Op::Unfollow(a, b) => Request::Unfollow {
                    token: tok(&tokens, a),
                    username: name(b),
                },
                Op::Post(u) => Request::PostTweet {
                    token: tok(&tokens, u),
                    text: "t".into(),
                    media: None,
                },
                Op::Retweet(u, t) => Request::Retweet {
                    token: tok(&tokens, u),
                    tweet: TweetId(t as u64),
                    text: "rt".into(),
                },
                Op::Like(u, t) => Request::Like {
                    token: tok(&tokens, u),
                    tweet: TweetId(t as u64),
                },
                Op::Unlike(u, t) => Request::Unlike {
                    token: tok(&tokens, u),
                    tweet: TweetId(t as u64),
                },
            };
            let before = s.state.clone();
            let resp = s.call(req);
            if resp.is_err() {
                assert_eq!(s.state, before, "failed request mutated state");
            }
            if let (Op::Signup(u) | Op::Login(u), Ok(Reply::Session { token, .. })) = (op, &resp) {
                tokens.insert(*u, token.clone());
            }
            responses.push(resp);
        }
        (s, responses)
    }

    proptest! {
        #[test]
        fn random_request_sequences_keep_invariants(ops in proptest::collection::vec(arb_op(), 0..80)) {
            let (s, responses) = run_ops(&ops, 0.3);
            prop_assert_eq!(s.state.check_invariants(), Ok(()));

            // alert conservation: every newly inserted like on someone else's tweet
            // yields exactly one liked alert for the author
            let mut likes: BTreeSet<(String, TweetId)> = BTreeSet::new();
            let mut expected: BTreeMap<String, usize> = BTreeMap::new();
            for (op, resp) in ops.iter().zip(&responses) {
                match (op, resp) {
                    (Op::Like(u, t), Ok(_)) => {
                        let tid = TweetId(*t as u64);
                        let liker = format!("user{u}");
                        let author = s.state.tweets[&tid].author.clone();
                        if likes.insert((liker.clone(), tid)) && author != liker {
                            *expected.entry(author).or_default() += 1;
                        }
                    }
                    (Op::Unlike(u, t), Ok(_)) => {
                        likes.remove(&(format!("user{u}"), TweetId(*t as u64)));
                    }
                    _ => {}
                }
            }
            for user in s.state.users.keys() {
                let liked = s
                    .state
                    .alerts_for(user)
                    .iter()
                    .filter(|a| a.kind == AlertKind::Liked)
                    .count();
                prop_assert_eq!(liked, expected.get(user).copied().unwrap_or(0));
            }
        }

        #[test]
        fn handling_is_deterministic(ops in proptest::collection::vec(arb_op(), 0..60)) {
            let (a, ra) = run_ops(&ops, 0.5);
            let (b, rb) = run_ops(&ops, 0.5);
            prop_assert_eq!(a.state, b.state);
            prop_assert_eq!(ra, rb);
        }
    }
}
