//! Formal model of the client UI.
//!
//! Both the human-facing web client and the headless agent client drive the
//! target through [`ClientSession`]. The session owns a [`ViewState`] whose
//! widget tree is rebuilt after every structural change; the actionable
//! widgets of that tree, numbered per parent and `(kind, label)` class in
//! display order, are the only actions a user (or agent) can take.
//!
//! View catalog (all authenticated views also carry the navigation panel
//! `window[main]#0/panel[nav]#0` with `button[Feed|Users|Alerts|Compose|Logout]#0`):
//!
//! | view        | components under `window[main]#0`                                              |
//! |-------------|---------------------------------------------------------------------------------|
//! | `login`     | `form[login]#0/{input[username]#0, input[password]#0, button[Login]#0, link[signup]#0}` |
//! | `signup`    | `form[signup]#0/{input[username]#0, input[password]#0, button[Sign up]#0, link[login]#0}` |
//! | `feed`      | `list[feed]#0/` per tweet, newest first: `button[Like]` or `button[Unlike]`, `button[Retweet]`, `button[Likes]` |
//! | `users`     | `list[users]#0/` per other user, by name: `button[Follow]` or `button[Unfollow]` |
//! | `alerts`    | `list[alerts]#0/` per alert, newest first: `button[liked]` or `button[followed]` |
//! | `composer`  | `form[compose]#0/{input[text]#0, input[media]#0 (not when retweeting), button[Post]#0 (only with non-blank text), button[Cancel]#0}` |
//! | `who_liked` | `panel[who_liked]#0/button[Back]#0`                                              |
//!
//! Navigation table: successful login or signup goes to `feed`; `link` buttons
//! swap between `login` and `signup`; nav buttons go to their view (`Compose`
//! opens `composer`); `Logout` returns to `login`; like, unlike, follow and
//! unfollow stay on the current view; `Retweet` opens `composer`; `Likes` opens
//! `who_liked`; `Post`, `Cancel` and `Back` return to `feed`; a `liked` alert
//! goes to `feed` and a `followed` alert to `users`. With the alert navigation
//! fault armed (enabled and `alert_count_seen >= threshold`) a `liked` alert
//! leaves the view on `alerts`.
//!
//! A server error leaves the view unchanged and lands in `last_error`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::id::ComponentId;
use crate::server::{Alert, AlertKind, ApiError, Backend, FaultConfig, Reply, Request, TweetId, TweetView};
use crate::trace::{ActionKind, KindTag, UiAction, View};

/// Label of the application window every component id starts from.
pub const WINDOW_LABEL: &str = "main";

/// Client side of the seeded navigation fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavFault {
    pub enabled: bool,
    pub threshold: u32,
}

impl NavFault {
    pub const fn off() -> Self {
        Self {
            enabled: false,
            threshold: crate::server::DEFAULT_ALERT_NAV_BUG_THRESHOLD,
        }
    }

    /// Pure function of the switch, the alerts seen and the threshold.
    pub const fn armed(&self, alerts_seen: u32) -> bool {
        self.enabled && alerts_seen >= self.threshold
    }
}

impl From<&FaultConfig> for NavFault {
    fn from(f: &FaultConfig) -> Self {
        Self {
            enabled: f.alert_nav_bug_enabled,
            threshold: f.alert_nav_bug_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Username,
    Password,
    Text,
    Media,
}

/// What an actionable widget does when used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Binding {
    Input { field: Field },
    GoSignup,
    GoLogin,
    SubmitLogin,
    SubmitSignup,
    Nav { view: View },
    Logout,
    Like { tweet: TweetId },
    Unlike { tweet: TweetId },
    Retweet { tweet: TweetId },
    ShowLikes { tweet: TweetId },
    Follow { username: String },
    Unfollow { username: String },
    OpenAlert { kind: AlertKind, position: usize },
    Post,
    Cancel,
    Back,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<(KindTag, Binding)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Widget>,
}

impl Widget {
    fn container(kind: &str, label: &str, children: Vec<Widget>) -> Self {
        Self {
            kind: kind.to_string(),
            label: Some(label.to_string()),
            action: None,
            children,
        }
    }

    fn actionable(kind: &str, label: &str, tag: KindTag, binding: Binding) -> Self {
        Self {
            kind: kind.to_string(),
            label: Some(label.to_string()),
            action: Some((tag, binding)),
            children: Vec::new(),
        }
    }

    fn button(label: &str, binding: Binding) -> Self {
        Self::actionable("button", label, KindTag::Click, binding)
    }
}

/// An actionable component on screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveComponent {
    pub id: ComponentId,
    pub kind: KindTag,
    pub binding: Binding,
}

/// Template of an available action: the component and its legal kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionTemplate {
    pub component: ComponentId,
    pub kind: KindTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidgetTree {
    pub root: Widget,
}

impl WidgetTree {
    pub fn root_id(&self) -> ComponentId {
        ComponentId::root(self.root.label.as_deref().unwrap_or(WINDOW_LABEL))
    }

    /// Actionable components in display order, with sibling numbering applied.
    pub fn active(&self) -> Vec<ActiveComponent> {
        let mut out = Vec::new();
        let root = self.root_id();
        if let Some((kind, binding)) = &self.root.action {
            out.push(ActiveComponent {
                id: root.clone(),
                kind: *kind,
                binding: binding.clone(),
            });
        }
        collect(&self.root, &root, &mut out);
        out
    }
}

fn collect(parent: &Widget, parent_id: &ComponentId, out: &mut Vec<ActiveComponent>) {
    let mut seen: Vec<(&str, Option<&str>, u32)> = Vec::new();
    for child in &parent.children {
        let class = (child.kind.as_str(), child.label.as_deref());
        let index = match seen.iter_mut().find(|(k, l, _)| (*k, *l) == class) {
            Some(entry) => {
                entry.2 += 1;
                entry.2
            }
            None => {
                seen.push((class.0, class.1, 0));
                0
            }
        };
        let id = parent_id.child(&child.kind, child.label.as_deref(), index);
        if let Some((kind, binding)) = &child.action {
            out.push(ActiveComponent {
                id: id.clone(),
                kind: *kind,
                binding: binding.clone(),
            });
        }
        collect(child, &id, out);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Form {
    pub username: String,
    pub password: String,
    pub text: String,
    pub media: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "context", rename_all = "snake_case")]
pub enum Context {
    #[default]
    None,
    Compose {
        retweet_of: Option<TweetId>,
    },
    WhoLiked {
        tweet: TweetId,
        likers: Vec<String>,
        retweets: Vec<TweetView>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRow {
    pub username: String,
    pub following: bool,
}

/// Everything the client shows, plus the tree derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewState {
    pub view: View,
    pub token: Option<String>,
    pub username: Option<String>,
    pub feed: Vec<TweetView>,
    pub users: Vec<UserRow>,
    /// Newest first.
    pub alerts: Vec<Alert>,
    /// Alerts delivered to this session by polling.
    pub alert_count_seen: u32,
    pub form: Form,
    pub context: Context,
    pub last_error: Option<ApiError>,
    pub tree: WidgetTree,
}

impl ViewState {
    fn logged_out() -> Self {
        let mut state = Self {
            view: View::Login,
            token: None,
            username: None,
            feed: Vec::new(),
            users: Vec::new(),
            alerts: Vec::new(),
            alert_count_seen: 0,
            form: Form::default(),
            context: Context::None,
            last_error: None,
            tree: WidgetTree {
                root: Widget::container("window", WINDOW_LABEL, Vec::new()),
            },
        };
        state.tree = render(&state);
        state
    }

    pub fn is_authenticated(&self) -> bool {
        self.token.is_some()
    }

    pub fn check_invariants(&self) -> Result<(), &'static str> {
        if !self.is_authenticated() && self.view.requires_session() {
            return Err("unauthenticated session outside login/signup");
        }
        if self.tree.root.kind != crate::id::ROOT_KIND {
            return Err("widget tree root is not a window");
        }
        let root = self.tree.root_id();
        if !self.tree.active().iter().all(|c| c.id.starts_with(&root)) {
            return Err("active component outside the window root");
        }
        Ok(())
    }
}

/// Projection onto the view name. Ignores the widget tree and all data.
pub fn observe_state(state: &ViewState) -> View {
    state.view
}

fn nav_panel() -> Widget {
    Widget::container(
        "panel",
        "nav",
        alloc::vec![
            Widget::button("Feed", Binding::Nav { view: View::Feed }),
            Widget::button("Users", Binding::Nav { view: View::Users }),
            Widget::button("Alerts", Binding::Nav { view: View::Alerts }),
            Widget::button("Compose", Binding::Nav { view: View::Composer }),
            Widget::button("Logout", Binding::Logout),
        ],
    )
}

fn input(label: &str, field: Field) -> Widget {
    Widget::actionable("input", label, KindTag::TextInput, Binding::Input { field })
}

fn render(state: &ViewState) -> WidgetTree {
    let mut children = Vec::new();
    if state.view.requires_session() {
        children.push(nav_panel());
    }
    let content = match state.view {
        View::Login => Widget::container(
            "form",
            "login",
            alloc::vec![
                input("username", Field::Username),
                input("password", Field::Password),
                Widget::button("Login", Binding::SubmitLogin),
                Widget::actionable("link", "signup", KindTag::Click, Binding::GoSignup),
            ],
        ),
        View::Signup => Widget::container(
            "form",
            "signup",
            alloc::vec![
                input("username", Field::Username),
                input("password", Field::Password),
                Widget::button("Sign up", Binding::SubmitSignup),
                Widget::actionable("link", "login", KindTag::Click, Binding::GoLogin),
            ],
        ),
        View::Feed => {
            let mut rows = Vec::with_capacity(state.feed.len() * 3);
            for t in &state.feed {
                rows.push(if t.liked_by_me {
                    Widget::button("Unlike", Binding::Unlike { tweet: t.id })
                } else {
                    Widget::button("Like", Binding::Like { tweet: t.id })
                });
                rows.push(Widget::button("Retweet", Binding::Retweet { tweet: t.id }));
                rows.push(Widget::button("Likes", Binding::ShowLikes { tweet: t.id }));
            }
            Widget::container("list", "feed", rows)
        }
        View::Users => {
            let rows = state
                .users
                .iter()
                .map(|u| {
                    if u.following {
                        Widget::button(
                            "Unfollow",
                            Binding::Unfollow {
                                username: u.username.clone(),
                            },
                        )
                    } else {
                        Widget::button(
                            "Follow",
                            Binding::Follow {
                                username: u.username.clone(),
                            },
                        )
                    }
                })
                .collect();
            Widget::container("list", "users", rows)
        }
        View::Alerts => {
            let rows = state
                .alerts
                .iter()
                .enumerate()
                .map(|(position, a)| {
                    let label = match a.kind {
                        AlertKind::Liked => "liked",
                        AlertKind::Followed => "followed",
                    };
                    Widget::button(label, Binding::OpenAlert { kind: a.kind, position })
                })
                .collect();
            Widget::container("list", "alerts", rows)
        }
        View::Composer => {
            let retweeting = matches!(state.context, Context::Compose { retweet_of: Some(_) });
            let mut fields = alloc::vec![input("text", Field::Text)];
            if !retweeting {
                fields.push(input("media", Field::Media));
            }
            if !state.form.text.trim().is_empty() {
                fields.push(Widget::button("Post", Binding::Post));
            }
            fields.push(Widget::button("Cancel", Binding::Cancel));
            Widget::container("form", "compose", fields)
        }
        View::WhoLiked => Widget::container("panel", "who_liked", alloc::vec![Widget::button("Back", Binding::Back)]),
    };
    children.push(content);
    WidgetTree {
        root: Widget::container("window", WINDOW_LABEL, children),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("component `{id}` is not active")]
    Unavailable { id: String },
    #[error("component `{id}` accepts `{expected}`, not `{got}`")]
    InvalidKind {
        id: String,
        expected: KindTag,
        got: KindTag,
    },
    #[error("text-input on `{id}` requires a payload")]
    MissingPayload { id: String },
}

/// Result of an action that was available and carried out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completion {
    Done,
    /// The mapped request failed; the view is unchanged.
    ServerError(ApiError),
}

impl Completion {
    pub fn error(&self) -> Option<&ApiError> {
        match self {
            Completion::Done => None,
            Completion::ServerError(e) => Some(e),
        }
    }
}

/// One client session: a view state plus the client-side fault switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientSession {
    state: ViewState,
    nav_fault: NavFault,
}

impl ClientSession {
    pub fn new(nav_fault: NavFault) -> Self {
        Self {
            state: ViewState::logged_out(),
            nav_fault,
        }
    }

    pub fn state(&self) -> &ViewState {
        &self.state
    }

    pub fn nav_fault(&self) -> NavFault {
        self.nav_fault
    }

    pub fn observe_state(&self) -> View {
        observe_state(&self.state)
    }

    pub fn active(&self) -> Vec<ActiveComponent> {
        self.state.tree.active()
    }

    pub fn available_actions(&self) -> Vec<ActionTemplate> {
        self.active()
            .into_iter()
            .map(|c| ActionTemplate {
                component: c.id,
                kind: c.kind,
            })
            .collect()
    }

    pub fn active_ids(&self) -> Vec<ComponentId> {
        self.active().into_iter().map(|c| c.id).collect()
    }

    /// Finds the active component for `(id, kind)`.
    pub fn resolve(&self, id: &ComponentId, kind: KindTag) -> Result<ActiveComponent, ClientError> {
        let component = self
            .active()
            .into_iter()
            .find(|c| &c.id == id)
            .ok_or_else(|| ClientError::Unavailable { id: id.encode() })?;
        if component.kind != kind {
            return Err(ClientError::InvalidKind {
                id: id.encode(),
                expected: component.kind,
                got: kind,
            });
        }
        Ok(component)
    }

    pub fn perform<B: Backend + ?Sized>(
        &mut self,
        action: &UiAction,
        backend: &mut B,
    ) -> Result<Completion, ClientError> {
        let component = self.resolve(&action.component, action.kind.tag())?;
        self.state.last_error = None;
        let outcome = self.apply(component.binding, &action.kind, backend);
        self.state.tree = render(&self.state);
        Ok(match outcome {
            Ok(()) => Completion::Done,
            Err(e) => {
                self.state.last_error = Some(e.clone());
                Completion::ServerError(e)
            }
        })
    }

    /// Polls the alert queue once. Returns the number of newly delivered alerts.
    pub fn poll_alerts<B: Backend + ?Sized>(&mut self, backend: &mut B) -> Result<u32, ApiError> {
        let Some(token) = self.state.token.clone() else {
            return Ok(0);
        };
        let delivered = self.sync_alerts(&token, backend)?;
        if delivered > 0 && self.state.view == View::Alerts {
            self.state.tree = render(&self.state);
        }
        Ok(delivered)
    }

    fn sync_alerts<B: Backend + ?Sized>(&mut self, token: &str, backend: &mut B) -> Result<u32, ApiError> {
        let reply = backend.call(Request::GetAlerts {
            token: token.to_string(),
        })?;
        let Reply::Alerts { mut alerts } = reply else {
            return Err(unexpected("get_alerts"));
        };
        let known = self.state.alerts.len();
        let delivered = alerts.len().saturating_sub(known) as u32;
        alerts.reverse();
        self.state.alerts = alerts;
        self.state.alert_count_seen += delivered;
        Ok(delivered)
    }

    fn token(&self) -> String {
        self.state.token.clone().unwrap_or_default()
    }

    fn enter_feed<B: Backend + ?Sized>(&mut self, backend: &mut B) -> Result<(), ApiError> {
        let Reply::Tweets { tweets } = backend.call(Request::GetFeed { token: self.token() })? else {
            return Err(unexpected("get_feed"));
        };
        self.state.feed = tweets;
        self.state.view = View::Feed;
        self.state.context = Context::None;
        Ok(())
    }

    fn enter_users<B: Backend + ?Sized>(&mut self, backend: &mut B) -> Result<(), ApiError> {
        let Reply::Users { users } = backend.call(Request::ListUsers { token: self.token() })? else {
            return Err(unexpected("list_users"));
        };
        let me = self.state.username.clone().unwrap_or_default();
        self.state.users = users
            .into_iter()
            .filter(|u| u.username != me)
            .map(|u| UserRow {
                following: u.followers.contains(&me),
                username: u.username,
            })
            .collect();
        self.state.view = View::Users;
        self.state.context = Context::None;
        Ok(())
    }

    fn start_session<B: Backend + ?Sized>(&mut self, reply: Reply, backend: &mut B) -> Result<(), ApiError> {
        let Reply::Session { token, username } = reply else {
            return Err(unexpected("session"));
        };
        let mut fresh = ViewState::logged_out();
        fresh.token = Some(token);
        fresh.username = Some(username);
        let previous = core::mem::replace(&mut self.state, fresh);
        if let Err(e) = self.enter_feed(backend) {
            self.state = previous;
            return Err(e);
        }
        Ok(())
    }

    fn open_composer(&mut self, retweet_of: Option<TweetId>) {
        self.state.form.text.clear();
        self.state.form.media.clear();
        self.state.context = Context::Compose { retweet_of };
        self.state.view = View::Composer;
    }

    fn apply<B: Backend + ?Sized>(
        &mut self,
        binding: Binding,
        kind: &ActionKind,
        backend: &mut B,
    ) -> Result<(), ApiError> {
        match binding {
            Binding::Input { field } => {
                let value = kind.payload().unwrap_or_default().to_string();
                let form = &mut self.state.form;
                match field {
                    Field::Username => form.username = value,
                    Field::Password => form.password = value,
                    Field::Text => form.text = value,
                    Field::Media => form.media = value,
                }
                Ok(())
            }
            Binding::GoSignup => {
                self.state.view = View::Signup;
                Ok(())
            }
            Binding::GoLogin => {
                self.state.view = View::Login;
                Ok(())
            }
            Binding::SubmitLogin | Binding::SubmitSignup => {
                let username = self.state.form.username.clone();
                let password = self.state.form.password.clone();
                let request = if binding == Binding::SubmitLogin {
                    Request::Login { username, password }
                } else {
                    Request::Signup { username, password }
                };
                let reply = backend.call(request)?;
                self.start_session(reply, backend)
            }
            Binding::Nav { view } => match view {
                View::Feed => self.enter_feed(backend),
                View::Users => self.enter_users(backend),
                View::Alerts => {
                    let token = self.token();
                    self.sync_alerts(&token, backend)?;
                    self.state.view = View::Alerts;
                    self.state.context = Context::None;
                    Ok(())
                }
                View::Composer => {
                    self.open_composer(None);
                    Ok(())
                }
                other => unreachable!("no nav button for {other}"),
            },
            Binding::Logout => {
                backend.call(Request::Logout { token: self.token() })?;
                self.state = ViewState::logged_out();
                Ok(())
            }
            Binding::Like { tweet } => {
                backend.call(Request::Like {
                    token: self.token(),
                    tweet,
                })?;
                self.enter_feed(backend)
            }
            Binding::Unlike { tweet } => {
                backend.call(Request::Unlike {
                    token: self.token(),
                    tweet,
                })?;
                self.enter_feed(backend)
            }
            Binding::Retweet { tweet } => {
                self.open_composer(Some(tweet));
                Ok(())
            }
            Binding::ShowLikes { tweet } => {
                let token = self.token();
                let Reply::Likers { usernames } = backend.call(Request::WhoLiked {
                    token: token.clone(),
                    tweet,
                })?
                else {
                    return Err(unexpected("who_liked"));
                };
                let Reply::Tweets { tweets } = backend.call(Request::GetRetweetsOf { token, tweet })? else {
                    return Err(unexpected("get_retweets_of"));
                };
                self.state.context = Context::WhoLiked {
                    tweet,
                    likers: usernames,
                    retweets: tweets,
                };
                self.state.view = View::WhoLiked;
                Ok(())
            }
            Binding::Follow { username } => {
                backend.call(Request::Follow {
                    token: self.token(),
                    username,
                })?;
                self.enter_users(backend)
            }
            Binding::Unfollow { username } => {
                backend.call(Request::Unfollow {
                    token: self.token(),
                    username,
                })?;
                self.enter_users(backend)
            }
            Binding::OpenAlert { kind, .. } => match kind {
                AlertKind::Liked if self.nav_fault.armed(self.state.alert_count_seen) => Ok(()),
                AlertKind::Liked => self.enter_feed(backend),
                AlertKind::Followed => self.enter_users(backend),
            },
            Binding::Post => {
                let token = self.token();
                let text = self.state.form.text.clone();
                let request = match self.state.context {
                    Context::Compose {
                        retweet_of: Some(tweet),
                    } => Request::Retweet { token, tweet, text },
                    _ => {
                        let media = Some(self.state.form.media.clone()).filter(|m| !m.is_empty());
                        Request::PostTweet { token, text, media }
                    }
                };
                backend.call(request)?;
                self.state.form.text.clear();
                self.state.form.media.clear();
                self.enter_feed(backend)
            }
            Binding::Cancel | Binding::Back => self.enter_feed(backend),
        }
    }
}

fn unexpected(what: &str) -> ApiError {
    ApiError::new(
        crate::server::ErrorKind::Internal,
        alloc::format!("unexpected reply to {what}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::rng::{seeded, SimRng};
    use crate::server::LocalServer;
    use proptest::prelude::*;

    type Server = LocalServer<SimRng, VirtualClock>;

    fn server() -> Server {
        LocalServer::new(seeded(9), VirtualClock::default(), FaultConfig::none())
    }

    fn id(text: &str) -> ComponentId {
        ComponentId::parse(text).unwrap()
    }

    fn click(text: &str) -> UiAction {
        UiAction::click(id(text))
    }

    fn typed(text: &str, payload: &str) -> UiAction {
        UiAction::text_input(id(text), payload)
    }

    fn signed_up(server: &mut Server, name: &str, nav: NavFault) -> ClientSession {
        let mut c = ClientSession::new(nav);
        for a in [
            click("window[main]#0/form[login]#0/link[signup]#0"),
            typed("window[main]#0/form[signup]#0/input[username]#0", name),
            typed("window[main]#0/form[signup]#0/input[password]#0", "pw"),
            click("window[main]#0/form[signup]#0/button[Sign up]#0"),
        ] {
            assert_eq!(c.perform(&a, server).unwrap(), Completion::Done);
        }
        assert_eq!(c.observe_state(), View::Feed);
        c
    }

    fn post(c: &mut ClientSession, server: &mut Server, text: &str) {
        c.perform(&click("window[main]#0/panel[nav]#0/button[Compose]#0"), server)
            .unwrap();
        c.perform(&typed("window[main]#0/form[compose]#0/input[text]#0", text), server)
            .unwrap();
        assert_eq!(
            c.perform(&click("window[main]#0/form[compose]#0/button[Post]#0"), server)
                .unwrap(),
            Completion::Done
        );
    }

    #[test]
    fn login_view_offers_exactly_four_actions() {
        let c = ClientSession::new(NavFault::off());
        let mut got: Vec<String> = c
            .available_actions()
            .into_iter()
            .map(|a| alloc::format!("{} {}", a.kind, a.component))
            .collect();
        got.sort();
        assert_eq!(
            got,
            [
                "click window[main]#0/form[login]#0/button[Login]#0",
                "click window[main]#0/form[login]#0/link[signup]#0",
                "text-input window[main]#0/form[login]#0/input[password]#0",
                "text-input window[main]#0/form[login]#0/input[username]#0",
            ]
        );
    }

    #[test]
    fn feed_numbers_like_buttons_in_display_order() {
        let mut s = server();
        let mut c = signed_up(&mut s, "u1", NavFault::off());
        for t in ["a", "b", "c"] {
            post(&mut c, &mut s, t);
        }
        let likes: Vec<_> = c
            .active_ids()
            .into_iter()
            .filter(|i| i.leaf().label.as_deref() == Some("Like"))
            .map(|i| i.leaf().index)
            .collect();
        assert_eq!(likes, [0, 1, 2]);
    }

    #[test]
    fn empty_alerts_view_has_only_navigation() {
        let mut s = server();
        let mut c = signed_up(&mut s, "u1", NavFault::off());
        c.perform(&click("window[main]#0/panel[nav]#0/button[Alerts]#0"), &mut s)
            .unwrap();
        assert_eq!(c.observe_state(), View::Alerts);
        assert!(c
            .active_ids()
            .iter()
            .all(|i| i.segments()[1].kind == "panel" && i.segments()[1].label.as_deref() == Some("nav")));
    }

    #[test]
    fn like_stays_on_feed_and_bumps_count() {
        let mut s = server();
        let mut author = signed_up(&mut s, "author", NavFault::off());
        post(&mut author, &mut s, "older");
        post(&mut author, &mut s, "newer");
        let mut fan = signed_up(&mut s, "fan", NavFault::off());
        fan.perform(&click("window[main]#0/panel[nav]#0/button[Users]#0"), &mut s)
            .unwrap();
        fan.perform(&click("window[main]#0/list[users]#0/button[Follow]#0"), &mut s)
            .unwrap();
        fan.perform(&click("window[main]#0/panel[nav]#0/button[Feed]#0"), &mut s)
            .unwrap();
        let before = fan.state().feed[1].like_count;
        fan.perform(&click("window[main]#0/list[feed]#0/button[Like]#1"), &mut s)
            .unwrap();
        assert_eq!(fan.observe_state(), View::Feed);
        assert_eq!(fan.state().feed[1].like_count, before + 1);
        assert!(fan.state().feed[1].liked_by_me);
    }

    /// Author with `n` liked alerts delivered, sitting on the alerts view.
    fn author_with_alerts(n: usize, nav: NavFault) -> (Server, ClientSession) {
        let mut s = server();
        let mut author = signed_up(&mut s, "author", nav);
        post(&mut author, &mut s, "hello");
        let mut fan = signed_up(&mut s, "fan", NavFault::off());
        fan.perform(&click("window[main]#0/panel[nav]#0/button[Users]#0"), &mut s)
            .unwrap();
        fan.perform(&click("window[main]#0/list[users]#0/button[Follow]#0"), &mut s)
            .unwrap();
        fan.perform(&click("window[main]#0/panel[nav]#0/button[Feed]#0"), &mut s)
            .unwrap();
        for i in 0..n {
            let label = if i % 2 == 0 { "Like" } else { "Unlike" };
            fan.perform(
                &click(&alloc::format!("window[main]#0/list[feed]#0/button[{label}]#0")),
                &mut s,
            )
            .unwrap();
        }
        // the follow above is an extra `followed` alert for the author
        author
            .perform(&click("window[main]#0/panel[nav]#0/button[Alerts]#0"), &mut s)
            .unwrap();
        (s, author)
    }

    #[test]
    fn liked_alert_goes_to_feed_when_fault_disabled() {
        let (mut s, mut author) = author_with_alerts(20, NavFault::off());
        assert!(author.state().alert_count_seen >= 10);
        author
            .perform(&click("window[main]#0/list[alerts]#0/button[liked]#0"), &mut s)
            .unwrap();
        assert_eq!(author.observe_state(), View::Feed);
    }

    #[test]
    fn liked_alert_stays_on_alerts_once_fault_armed() {
        let nav = NavFault {
            enabled: true,
            threshold: 10,
        };
        // 19 toggles → 10 likes → 10 liked alerts, plus 1 followed alert
        let (mut s, mut author) = author_with_alerts(19, nav);
        assert_eq!(author.state().alert_count_seen, 11);
        author
            .perform(&click("window[main]#0/list[alerts]#0/button[liked]#0"), &mut s)
            .unwrap();
        assert_eq!(author.observe_state(), View::Alerts);
    }

    #[test]
    fn fault_below_threshold_matches_canonical() {
        let nav = NavFault {
            enabled: true,
            threshold: 10,
        };
        // 1 followed + 5 liked = 6 alerts seen
        let (mut s1, mut buggy) = author_with_alerts(9, nav);
        let (mut s2, mut canon) = author_with_alerts(9, NavFault::off());
        assert_eq!(buggy.state().alert_count_seen, 6);
        let a = click("window[main]#0/list[alerts]#0/button[liked]#0");
        buggy.perform(&a, &mut s1).unwrap();
        canon.perform(&a, &mut s2).unwrap();
        assert_eq!(buggy.state(), canon.state());
        assert_eq!(buggy.observe_state(), View::Feed);
    }

    #[test]
    fn followed_alert_goes_to_users() {
        let (mut s, mut author) = author_with_alerts(0, NavFault::off());
        author
            .perform(&click("window[main]#0/list[alerts]#0/button[followed]#0"), &mut s)
            .unwrap();
        assert_eq!(author.observe_state(), View::Users);
    }

    #[test]
    fn unavailable_and_kind_errors() {
        let mut s = server();
        let mut c = ClientSession::new(NavFault::off());
        let err = c
            .perform(&click("window[main]#0/list[feed]#0/button[Like]#0"), &mut s)
            .unwrap_err();
        assert!(matches!(err, ClientError::Unavailable { .. }));
        let err = c
            .perform(&typed("window[main]#0/form[login]#0/button[Login]#0", "x"), &mut s)
            .unwrap_err();
        assert!(matches!(err, ClientError::InvalidKind { .. }));
        assert_eq!(c.observe_state(), View::Login);
    }

    #[test]
    fn failed_login_keeps_view_and_records_error() {
        let mut s = server();
        let mut c = ClientSession::new(NavFault::off());
        c.perform(
            &typed("window[main]#0/form[login]#0/input[username]#0", "ghost"),
            &mut s,
        )
        .unwrap();
        let out = c
            .perform(&click("window[main]#0/form[login]#0/button[Login]#0"), &mut s)
            .unwrap();
        assert!(matches!(out, Completion::ServerError(ref e) if e.code == 401));
        assert_eq!(c.observe_state(), View::Login);
        assert_eq!(c.state().last_error.as_ref().map(|e| e.code), Some(401));
    }

    #[test]
    fn post_button_requires_text() {
        let mut s = server();
        let mut c = signed_up(&mut s, "u1", NavFault::off());
        c.perform(&click("window[main]#0/panel[nav]#0/button[Compose]#0"), &mut s)
            .unwrap();
        let post = id("window[main]#0/form[compose]#0/button[Post]#0");
        assert!(!c.active_ids().contains(&post));
        c.perform(&typed("window[main]#0/form[compose]#0/input[text]#0", "hi"), &mut s)
            .unwrap();
        assert!(c.active_ids().contains(&post));
    }

    #[test]
    fn observe_is_a_projection() {
        let mut s = server();
        let a = signed_up(&mut s, "u1", NavFault::off());
        let mut b = a.clone();
        post(&mut b, &mut s, "x");
        assert_ne!(a.state().tree, b.state().tree);
        assert_eq!(a.observe_state(), b.observe_state());
        assert_eq!(observe_state(a.state()), View::Feed);
    }

    #[test]
    fn logout_returns_to_login_ids() {
        let mut s = server();
        let mut c = signed_up(&mut s, "u1", NavFault::off());
        c.perform(&click("window[main]#0/panel[nav]#0/button[Logout]#0"), &mut s)
            .unwrap();
        assert_eq!(c.observe_state(), View::Login);
        assert_eq!(c.active_ids(), ClientSession::new(NavFault::off()).active_ids());
    }

    proptest! {
        // closure, prefix rule and state invariants along random walks
        #[test]
        fn random_walks_stay_in_catalog(choices in proptest::collection::vec((0usize..64, 0u8..4), 1..120)) {
            let mut s = server();
            let mut other = signed_up(&mut s, "other", NavFault::off());
            post(&mut other, &mut s, "seed tweet");
            let mut c = ClientSession::new(NavFault { enabled: true, threshold: 2 });
            for (pick, payload) in choices {
                let available = c.available_actions();
                prop_assert!(!available.is_empty());
                let root = c.state().tree.root_id();
                prop_assert!(available.iter().all(|a| a.component.starts_with(&root)));
                let t = &available[pick % available.len()];
                let action = match t.kind {
                    KindTag::Click => UiAction::click(t.component.clone()),
                    KindTag::TextInput => {
                        let text = ["walker", "pw", "other", ""][payload as usize];
                        UiAction::text_input(t.component.clone(), text)
                    }
                };
                c.perform(&action, &mut s).unwrap();
                let _ = c.poll_alerts(&mut s);
                prop_assert!(View::ALL.contains(&c.observe_state()));
                prop_assert_eq!(c.state().check_invariants(), Ok(()));
            }
        }
    }
}
