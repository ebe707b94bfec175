//! Scripted and random "human" sessions recorded on a fresh demo target.

#![allow(dead_code)]

use synthuser::core::agents::{Agent, Identity, RandomAgent};
use synthuser::core::clock::VirtualClock;
use synthuser::core::play::LikeStimulus;
use synthuser::core::rng::seeded;
use synthuser::core::trace::KindTag;
use synthuser::core::tracker::MemorySink;
use synthuser::core::{ClientSession, ComponentId, FaultConfig, NavFault, Trace, Tracker, View};
use synthuser::engine::{LocalTarget, SimServer};

pub const FIXTURES: LocalTarget = LocalTarget { fixture_users: 3 };

pub struct Recorder {
    pub server: SimServer,
    pub tracker: Tracker<MemorySink, VirtualClock>,
    pub identity: Identity,
}

impl Recorder {
    pub fn new(target: &LocalTarget, session: &str, username: &str) -> Self {
        Self {
            server: target.server(&FaultConfig::none(), 0).unwrap(),
            tracker: Tracker::wrap(
                ClientSession::new(NavFault::off()),
                MemorySink::default(),
                VirtualClock::new(1_700_000_000_000, 1_500),
                session,
                0,
            ),
            identity: Identity {
                username: username.into(),
                password: format!("{username}-secret"),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.tracker.sink().events.len()
    }

    pub fn view(&self) -> View {
        self.tracker.observe_state()
    }

    fn act(&mut self, id: &str, kind: KindTag, payload: Option<&str>) {
        let id = ComponentId::parse(id).unwrap();
        let done = self
            .tracker
            .trigger(&id, kind, payload, &mut self.server)
            .unwrap_or_else(|e| panic!("scripted action {id} failed: {e}"));
        assert!(done.error().is_none(), "scripted action {id} was refused: {done:?}");
        self.tracker.poll_alerts(&mut self.server).unwrap();
    }

    pub fn click(&mut self, id: &str) {
        self.act(id, KindTag::Click, None);
    }

    pub fn type_in(&mut self, id: &str, text: &str) {
        self.act(id, KindTag::TextInput, Some(text));
    }

    pub fn has(&self, id: &str) -> bool {
        let id = ComponentId::parse(id).unwrap();
        self.tracker.active_ids().contains(&id)
    }

    pub fn nav(&mut self, button: &str) {
        self.click(&format!("window[main]#0/panel[nav]#0/button[{button}]#0"));
    }

    pub fn sign_up(&mut self) {
        let (user, pw) = (self.identity.username.clone(), self.identity.password.clone());
        self.click("window[main]#0/form[login]#0/link[signup]#0");
        self.type_in("window[main]#0/form[signup]#0/input[username]#0", &user);
        self.type_in("window[main]#0/form[signup]#0/input[password]#0", &pw);
        self.click("window[main]#0/form[signup]#0/button[Sign up]#0");
    }

    pub fn post(&mut self, text: &str) {
        self.nav("Compose");
        self.type_in("window[main]#0/form[compose]#0/input[text]#0", text);
        self.click("window[main]#0/form[compose]#0/button[Post]#0");
    }

    pub fn trace(self) -> Trace {
        let (_, sink) = self.tracker.into_parts();
        let session = sink.events.first().map(|e| e.session.clone()).unwrap_or_default();
        Trace {
            session,
            events: sink.events,
        }
    }
}

/// A user who posts, receives likes from a scripted account and checks them:
/// every click on a `liked` alert lands on the feed.
pub fn alert_heavy_trace(events: usize) -> Trace {
    let mut r = Recorder::new(&FIXTURES, "human-alerts", "alice");
    let mut fan = LikeStimulus::new(
        Identity {
            username: "fan".into(),
            password: "fan-pw".into(),
        },
        1,
    );
    r.sign_up();
    r.post("hello");
    let mut round = 0usize;
    while r.len() < events {
        fan.poke("alice", &mut r.server);
        let script: &[&str] = match round % 4 {
            0 => &["Alerts", "liked", "Like", "Feed"],
            1 => &["Alerts", "liked", "Users", "Feed"],
            2 => &["Alerts", "followed", "Feed", "Alerts", "liked"],
            _ => &["Compose-post", "Alerts", "liked", "Unlike"],
        };
        for step in script {
            if r.len() >= events {
                break;
            }
            match *step {
                "liked" => r.click("window[main]#0/list[alerts]#0/button[liked]#0"),
                "followed" => r.click("window[main]#0/list[alerts]#0/button[followed]#0"),
                "Like" | "Unlike" => {
                    let id = format!("window[main]#0/list[feed]#0/button[{step}]#0");
                    if r.has(&id) {
                        r.click(&id);
                    } else {
                        r.nav("Feed");
                    }
                }
                "Compose-post" => {
                    if r.len() + 3 <= events {
                        r.post(&format!("note {round}"));
                    } else {
                        r.nav("Feed");
                    }
                }
                nav => r.nav(nav),
            }
        }
        round += 1;
    }
    r.trace()
}

/// A user clicking around at random until `events` actions completed.
pub fn random_human_trace(seed: u64, events: usize) -> Trace {
    let name = format!("human-{seed}");
    let mut r = Recorder::new(&FIXTURES, &name, &name);
    let mut agent = RandomAgent::new(r.identity.clone());
    let mut rng = seeded(seed);
    let mut attempts = 0;
    while r.len() < events {
        attempts += 1;
        assert!(attempts < events * 50, "random human got stuck");
        let available = r.tracker.available_actions();
        let view = r.view();
        let choice = agent.select(view, &available, &mut rng).unwrap();
        r.tracker.perform(&choice.action, &mut r.server).unwrap();
        r.tracker.poll_alerts(&mut r.server).unwrap();
    }
    r.trace()
}
