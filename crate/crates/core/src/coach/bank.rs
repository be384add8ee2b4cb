//! Utterance templates and the seeded generator that picks among them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coach::{Cause, Expression, Gesture};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tone {
    Warmth,
    Competence,
}

impl Tone {
    pub fn other(self) -> Tone {
        match self {
            Tone::Warmth => Tone::Competence,
            Tone::Competence => Tone::Warmth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub tone: Tone,
    /// Text with `{name}` placeholders.
    pub text: String,
    pub gesture: Gesture,
    pub expression: Expression,
}

/// 64-bit linear congruential generator (Knuth's MMIX constants). Chosen
/// over a library RNG so transcripts never move with a dependency bump.
#[derive(Debug, Clone)]
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed)
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 33) as u32
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.next_u32() as usize % n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceBank {
    pub templates: BTreeMap<Cause, Vec<Template>>,
}

/// Replaces `{key}` placeholders; unknown keys are left as written.
pub fn fill(text: &str, vars: &[(&str, String)]) -> String {
    let mut out = text.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

impl UtteranceBank {
    pub fn validate(&self) -> Result<()> {
        for cause in Cause::ALL {
            let list = self.templates.get(&cause).map(Vec::as_slice).unwrap_or(&[]);
            for tone in [Tone::Warmth, Tone::Competence] {
                let n = list.iter().filter(|t| t.tone == tone).count();
                if n < 2 {
                    return Err(Error::Spec(format!(
                        "bank has {n} {tone:?} templates for {cause:?}, need 2"
                    )));
                }
            }
            if list.iter().any(|t| t.text.trim().is_empty()) {
                return Err(Error::Spec(format!("empty template for {cause:?}")));
            }
        }
        Ok(())
    }

    pub fn of(&self, cause: Cause, tone: Tone) -> Vec<&Template> {
        self.templates
            .get(&cause)
            .map(|l| l.iter().filter(|t| t.tone == tone).collect())
            .unwrap_or_default()
    }

    pub fn pick(&self, cause: Cause, tone: Tone, rng: &mut Lcg) -> &Template {
        let list = self.of(cause, tone);
        list[rng.below(list.len())]
    }
}

fn t(tone: Tone, text: &str, gesture: Gesture, expression: Expression) -> Template {
    Template {
        tone,
        text: text.to_string(),
        gesture,
        expression,
    }
}

impl Default for UtteranceBank {
    fn default() -> Self {
        use Expression as E;
        use Gesture as G;
        use Tone::{Competence as C, Warmth as W};
        let mut m = BTreeMap::new();
        m.insert(
            Cause::Greeting,
            vec![
                t(W, "Hello, it's really nice to see you! I'm Lydia and I'll be with you for today's training.", G::Wave, E::Joy),
                t(W, "Welcome back! I'm glad you're here. Let's have a good session together.", G::HandOnHeart, E::Joy),
                t(C, "Hello! First I'll take a few minutes to record your resting signals, so please sit comfortably and relax.", G::Explain, E::Neutral),
                t(C, "Welcome. We start with a short calibration: just breathe calmly while I measure your baseline.", G::OpenPalms, E::Neutral),
            ],
        );
        m.insert(
            Cause::Instruction,
            vec![
                t(W, "You're all set! Today we'll do {sessions} sessions of the {exercise}. Take your time, I'm right here with you.", G::OpenPalms, E::Joy),
                t(W, "Great, thank you for your patience. We'll trace the {exercise} together, {sessions} times. Ready when you are!", G::Beckon, E::HappyFor),
                t(C, "Calibration complete. Follow the {exercise} on the screen as accurately as you can, {sessions} sessions in total.", G::PointScreen, E::Neutral),
                t(C, "Now move the handle along the {exercise}. Accuracy matters more than speed. There will be {sessions} sessions.", G::Explain, E::Neutral),
            ],
        );
        m.insert(
            Cause::Distraction,
            vec![
                t(W, "Hey, I noticed your eyes wandered off the screen. That happens to everyone! Let's look back at the path together.", G::Beckon, E::Concern),
                t(W, "It seems something caught your attention. No worries, come back to the screen whenever you're ready.", G::Nod, E::Concern),
                t(C, "Your gaze left the screen for a while. I suggest keeping your eyes on the target to keep your accuracy up.", G::PointScreen, E::Neutral),
                t(C, "I recommend focusing on the moving target: following it with your eyes helps the hand stay on the path.", G::PointScreen, E::Neutral),
            ],
        );
        m.insert(
            Cause::Pain,
            vec![
                t(W, "It looks like this movement might be uncomfortable. Your wellbeing comes first, so please go gently.", G::HandOnHeart, E::Concern),
                t(W, "I'm sorry if this hurts. Slow down as much as you need, I'll stay right here with you.", G::CalmDown, E::Concern),
                t(C, "I noticed signs of discomfort. I suggest making smaller, slower movements, and tell your therapist if it persists.", G::CalmDown, E::Concern),
                t(C, "You seem to be in pain. I recommend relaxing your shoulder and reducing the speed of the movement.", G::Explain, E::Concern),
            ],
        );
        m.insert(
            Cause::Stress,
            vec![
                t(W, "You seem a bit tense right now, and that's completely okay. Let's take a break and breathe together for a moment.", G::CalmDown, E::Concern),
                t(W, "I can tell this is demanding. You're doing well, so please take a short break and relax before we continue.", G::HandOnHeart, E::Concern),
                t(C, "Your heart signals show increased stress. I recommend taking a break now; we'll continue when you feel ready.", G::CalmDown, E::Concern),
                t(C, "Signs of stress have been detected. I suggest taking a break of a few minutes before resuming the exercise.", G::Explain, E::Concern),
            ],
        );
        m.insert(
            Cause::SessionSummary,
            vec![
                t(W, "WOW! Session {session} is done. I'm impressed by your determination!", G::ThumbsUp, E::Admiration),
                t(W, "Well done on finishing session {session}! I really enjoy training with you.", G::Clap, E::HappyFor),
                t(C, "Your overall accuracy in session {session} gives a deviation index of {pdi}; lower is better.", G::Explain, E::Neutral),
                t(C, "Session {session} finished with a performance deviation index of {pdi}. Keep the hand close to the path.", G::PointScreen, E::Neutral),
            ],
        );
        m.insert(
            Cause::FinalSummary,
            vec![
                t(W, "WOW! I'm impressed by your determination. Thank you for training with me today!", G::Clap, E::Admiration),
                t(W, "You did a wonderful job today, and I'm proud of the effort you put in. See you next time!", G::Bow, E::Joy),
                t(C, "Here is your overall accuracy: performance deviation index {pdi_list}.", G::Explain, E::Neutral),
                t(C, "Let's review your results. Your deviation index per session was {pdi_list}.", G::PointScreen, E::Neutral),
            ],
        );
        m.insert(
            Cause::DifficultyChange,
            vec![
                t(W, "You're doing great, and I believe in you. For the next session I'll {change}.", G::Nod, E::HappyFor),
                t(W, "Thank you for your effort! To keep things right for you, I'll {change}.", G::OpenPalms, E::Joy),
                t(C, "Based on your deviation index of {pdi}, I recommend that I {change}.", G::Explain, E::Neutral),
                t(C, "Your last index was {pdi}, so I suggest we adjust the exercise: I'll {change}.", G::Explain, E::Neutral),
            ],
        );
        UtteranceBank { templates: m }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bank_is_complete() {
        let b = UtteranceBank::default();
        b.validate().unwrap();
        let all: Vec<&str> = b
            .templates
            .values()
            .flatten()
            .map(|t| t.text.as_str())
            .collect();
        assert!(all
            .iter()
            .any(|t| t.contains("I'm impressed by your determination")));
        assert!(all.iter().any(|t| t.contains("overall accuracy")));
        assert!(b
            .of(Cause::Stress, Tone::Warmth)
            .iter()
            .all(|t| t.text.contains("break")));
        assert!(b
            .of(Cause::Stress, Tone::Competence)
            .iter()
            .all(|t| t.text.contains("break")));
    }

    #[test]
    fn lcg_sequence_is_fixed() {
        let mut a = Lcg::new(0);
        // state_1 = c, state_2 = a*c + c (mod 2^64)
        let s1: u64 = 1442695040888963407;
        let s2 = s1
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        assert_eq!(a.next_u32(), (s1 >> 33) as u32);
        assert_eq!(a.next_u32(), (s2 >> 33) as u32);
    }

    #[test]
    fn fill_placeholders() {
        assert_eq!(fill("a {x} b {y}", &[("x", "1".into())]), "a 1 b {y}");
    }

    #[test]
    fn missing_tone_rejected() {
        let mut b = UtteranceBank::default();
        b.templates
            .get_mut(&Cause::Pain)
            .unwrap()
            .retain(|t| t.tone == Tone::Warmth);
        assert!(b.validate().is_err());
    }
}
