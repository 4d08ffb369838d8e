//! Brute-force reference for action resolution on a two-agent world with one
//! prey and one plant. Written from the rules alone; shares no code with the
//! library resolver.

#[derive(Clone, Copy, Debug)]
pub struct Rules {
    pub max_hp: i64,
    pub collect_cap: u32,
    pub nutrition: i64,
    pub respawn_delay: u32,
    pub min_age_repro: u32,
    pub min_hp_repro: i64,
    pub hp_cost_repro: i64,
    pub offspring_hp: i64,
    pub message_max_length: usize,
    pub intercept: f64,
    pub slope: f64,
}

impl Rules {
    pub fn success(&self, delta_pa: f64) -> f64 {
        let x = delta_pa / self.slope;
        let tanh = (1.0 - (-2.0 * x).exp()) / (1.0 + (-2.0 * x).exp());
        let p = 0.5 + self.intercept + 0.4 * tanh;
        if p < 0.1 {
            0.1
        } else if p > 0.9 {
            0.9
        } else {
            p
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prey {
    pub hp: i64,
    pub max_hp: i64,
    pub pa: f64,
    pub counter: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mini {
    pub hp: [i64; 2],
    pub pa: [f64; 2],
    pub age: u32,
    pub prey: Option<Prey>,
    pub plant: u32,
    pub plant_timer: u32,
    pub newborns: u32,
}

impl Mini {
    pub fn alive(&self, i: usize) -> bool {
        self.hp[i] > 0
    }
}

/// Who an action names: the other agent, the actor itself, or an unknown id.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Who {
    Other,
    Me,
    Ghost,
}

#[derive(Clone, Debug)]
pub enum Act {
    Collect { real: bool, quantity: u32 },
    Hunt { real: bool },
    Reproduce,
    Allocate(Vec<(Who, u32)>),
    Communicate { to: Vec<Who>, len: usize },
    Fight(Who),
    Rob(Who, u32),
    DoNothing,
}

impl Act {
    pub fn is_social(&self) -> bool {
        matches!(
            self,
            Act::Allocate(_) | Act::Communicate { .. } | Act::Fight(_) | Act::Rob(..) | Act::DoNothing
        )
    }

    pub fn is_production(&self) -> bool {
        matches!(
            self,
            Act::Collect { .. } | Act::Hunt { .. } | Act::Reproduce | Act::DoNothing
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expected {
    pub nullified: bool,
    pub success: bool,
    pub after: Mini,
    /// Probability of the single Bernoulli draw, if one was taken.
    pub draw: Option<f64>,
}

fn void(m: &Mini) -> Expected {
    Expected {
        nullified: true,
        success: false,
        after: m.clone(),
        draw: None,
    }
}

fn done(after: Mini, success: bool, draw: Option<f64>) -> Expected {
    Expected {
        nullified: false,
        success,
        after,
        draw,
    }
}

fn living_other(m: &Mini, who: Who) -> bool {
    who == Who::Other && m.alive(1)
}

/// Applies `act` by agent 0 in a social or production round with the Bernoulli
/// outcome fixed to `coin`.
pub fn expected(m: &Mini, act: &Act, social: bool, coin: bool, r: &Rules) -> Expected {
    let legal = if social { act.is_social() } else { act.is_production() };
    if !legal || !m.alive(0) {
        return void(m);
    }
    let mut n = m.clone();
    match act {
        Act::DoNothing => done(n, true, None),
        Act::Collect { real, quantity } => {
            let q = *quantity;
            if !real || q == 0 || m.plant < q {
                return void(m);
            }
            let got = q.min(m.plant).min(r.collect_cap);
            n.hp[0] = (m.hp[0] + got as i64 * r.nutrition).min(r.max_hp);
            n.plant -= got;
            if n.plant == 0 {
                n.plant_timer = r.respawn_delay;
            }
            done(n, true, None)
        }
        Act::Reproduce => {
            if m.age < r.min_age_repro || m.hp[0] < r.min_hp_repro {
                return void(m);
            }
            n.newborns += 1;
            n.hp[0] = (m.hp[0] - r.hp_cost_repro).max(0);
            done(n, true, None)
        }
        Act::Allocate(plan) => {
            if plan.is_empty() {
                return void(m);
            }
            let mut total = 0;
            for (who, amount) in plan {
                if !living_other(m, *who) || *amount == 0 {
                    return void(m);
                }
                total += *amount as i64;
            }
            if m.hp[0] <= total {
                return void(m);
            }
            n.hp[1] = (m.hp[1] + total).min(r.max_hp);
            n.hp[0] = m.hp[0] - total;
            done(n, true, None)
        }
        Act::Communicate { to, len } => {
            if to.is_empty() || to.iter().any(|w| !living_other(m, *w)) || *len > r.message_max_length {
                return void(m);
            }
            done(n, true, None)
        }
        Act::Fight(who) => {
            if !living_other(m, *who) {
                return void(m);
            }
            n.hp[0] = m.hp[0] - 1;
            if n.hp[0] <= 0 {
                n.hp[0] = 0;
                return done(n, false, None);
            }
            let p = r.success(m.pa[0] - m.pa[1]);
            if coin {
                let hit = m.pa[0].floor().max(0.0) as i64;
                n.hp[1] = (m.hp[1] - hit).max(0);
            }
            done(n, coin, Some(p))
        }
        Act::Rob(who, amount) => {
            let amount = *amount as i64;
            if !living_other(m, *who) || amount == 0 || m.hp[1] < amount {
                return void(m);
            }
            n.hp[0] = m.hp[0] - 1;
            if n.hp[0] <= 0 {
                n.hp[0] = 0;
                return done(n, false, None);
            }
            let p = r.success(m.pa[0] - m.pa[1]);
            if coin {
                n.hp[1] = m.hp[1] - amount;
                n.hp[0] = (n.hp[0] + amount).min(r.max_hp);
            }
            done(n, coin, Some(p))
        }
        Act::Hunt { real } => {
            let prey = match m.prey {
                Some(p) if *real && p.hp > 0 => p,
                _ => return void(m),
            };
            n.hp[0] = m.hp[0] - 1;
            if n.hp[0] <= 0 {
                n.hp[0] = 0;
                return done(n, false, None);
            }
            let p = r.success(m.pa[0] - prey.pa);
            if coin {
                let hit = m.pa[0].floor().max(0.0) as i64;
                let left = (prey.hp - hit).max(0);
                if left == 0 {
                    n.prey = None;
                    n.hp[0] = (n.hp[0] + prey.max_hp).min(r.max_hp);
                } else {
                    n.prey = Some(Prey { hp: left, ..prey });
                }
            } else {
                n.hp[0] = (n.hp[0] - prey.counter).max(0);
            }
            done(n, coin, Some(p))
        }
    }
}
