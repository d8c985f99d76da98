use serde::{Deserialize, Serialize};

use crate::gateway::ChatPrompt;
use crate::outline::{render_with_style, CommentStyle};
use crate::source::{SourceError, SourceUnit};

use super::fewshot::{default_few_shots, FewShotExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    /// The model repeats the code with comments added.
    Interleaved,
    /// The model answers with `N| text` lines against numbered code.
    Infilling,
}

impl Technique {
    pub fn name(self) -> &'static str {
        match self {
            Technique::Interleaved => "interleaved",
            Technique::Infilling => "infilling",
        }
    }
}

impl std::str::FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interleaved" => Ok(Technique::Interleaved),
            "infilling" => Ok(Technique::Infilling),
            other => Err(format!("unknown technique {other:?}")),
        }
    }
}

pub const INTERLEAVED_INSTRUCTIONS: &str = "\
You are an expert programmer.
You are especially good at understanding and explaining the main ideas in a code function.
Your task is to write comments that summarize the main ideas in the code.

Follow these rules:
* Use the comments to organize the code into logical sections.
* Do not change the code aside from adding comments.
* Do not remove or change any existing comments. Only add comments.
* Each comment should be one sentence or phrase.
* When applicable, the comment should explain why the code is written that way, but only if the reasoning is unclear.
* The comment should not be too detailed, so it is quick to read.
* Do not add any comments to the docstring.
* Aim for at most 3 comments for short functions, or at most 5 comments for long functions.
* Do not comment every line.
* Do not explain in words. Only provide the code with comments added, nothing else.";

pub const INFILLING_INSTRUCTIONS: &str = "\
You are an expert programmer.
You are especially good at understanding and explaining the main ideas in a code function.
Your task is to write comments that summarize the main ideas in the code.

Follow these rules:
* First, write the line number where a logical section of the code starts.
* Then, write a comment to explain and summarize that section of the code.
* Write only one comment for each logical section of the code.
* Each comment should be one sentence or phrase.
* When applicable, the comment should explain why the code is written that way, but only if the reasoning is unclear.
* The comment should not be too detailed, so it is quick to read.
* Do not add any comments to the docstring.
* Aim for at most 3 comments for short functions, or at most 5 comments for long functions.
* Do not comment every line.
* Do not repeat the code in your response.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptConfig {
    pub technique: Technique,
    pub instructions: String,
    pub few_shots: Vec<FewShotExample>,
}

impl PromptConfig {
    /// Default instructions for `technique` and the built-in examples.
    pub fn default_for(technique: Technique) -> Self {
        Self::with_few_shots(technique, default_few_shots())
    }

    pub fn with_few_shots(technique: Technique, few_shots: Vec<FewShotExample>) -> Self {
        let instructions = match technique {
            Technique::Interleaved => INTERLEAVED_INSTRUCTIONS,
            Technique::Infilling => INFILLING_INSTRUCTIONS,
        };
        Self {
            technique,
            instructions: instructions.to_string(),
            few_shots,
        }
    }
}

fn interleaved_user(code: &str) -> String {
    format!(
        "Please help me understand this code:\n```\n{code}\n```\n\n\
         Identify the logical sections of the code and summarize them by adding comments. \
         Only provide the code with comments, nothing else."
    )
}

fn infilling_user(numbered: &str) -> String {
    format!(
        "Please help me understand this code, with line numbers added for reference:\n```\n{numbered}\n```\n\n\
         Identify the logical sections of the code and summarize them. \
         Format your response by providing, for each logical section, the line number where that section starts, \
         followed by one sentence that summarizes that section.\n\n\
         Do not repeat the code! Just provide the summary."
    )
}

pub fn build_prompt(unit: &SourceUnit, config: &PromptConfig) -> Result<ChatPrompt, SourceError> {
    if unit.is_empty() {
        return Err(SourceError::EmptyUnit);
    }
    let mut prompt = ChatPrompt::new(config.instructions.clone());
    for ex in &config.few_shots {
        prompt = match config.technique {
            Technique::Interleaved => {
                let annotated = render_with_style(&ex.unit, &ex.gold, CommentStyle::Plain)
                    .expect("few-shot gold outlines are valid");
                prompt
                    .user(interleaved_user(&ex.unit.joined()))
                    .assistant(format!("```\n{}\n```", annotated.joined()))
            }
            Technique::Infilling => prompt
                .user(infilling_user(&ex.unit.number_lines()?))
                .assistant(ex.gold.to_infilling_text()),
        };
    }
    let query = match config.technique {
        Technique::Interleaved => interleaved_user(&unit.joined()),
        Technique::Infilling => infilling_user(&unit.number_lines()?),
    };
    Ok(prompt.user(query))
}
