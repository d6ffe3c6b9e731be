#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "annotagg/label_data.hpp"

namespace annotagg::prompts {

enum class Style { plain, field_template };

/// A classification task: instruction template with exactly one {text}
/// placeholder, its label space, and the prompt layout.
class TaskSpec {
 public:
  /// Throws UsageError unless the instruction holds exactly one {text}, and,
  /// for closed-set tasks, unless every label name occurs in it.
  TaskSpec(std::string name, std::string instruction, LabelSpace labels, Style style,
           bool closed_set = true);

  static TaskSpec from_json(const nlohmann::ordered_json& j);
  static TaskSpec load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;

  const std::string& name() const { return name_; }
  const std::string& instruction() const { return instruction_; }
  const LabelSpace& label_space() const { return labels_; }
  Style style() const { return style_; }

  /// Instruction with {text} replaced.
  std::string fill(std::string_view text) const;
  /// Instruction with the placeholder removed, for the <Definition> field.
  std::string definition() const;

 private:
  std::string name_;
  std::string instruction_;
  LabelSpace labels_;
  Style style_;
  bool closed_set_;
  std::size_t placeholder_ = 0;
  std::map<std::string, std::string> aliases_;
};

struct Exemplar {
  std::string text;
  LabelId label;
};

/// Zero-shot prompt, or few-shot with exemplar blocks first. Plain style:
///   <filled instruction>\nAnswer: <label>   (per exemplar, blank-line separated)
///   <filled instruction>\nAnswer:
/// Field style:
///   <Definition> <definition> <Input> <text> <Response>: <label>
///   <Definition> <definition> <Input> <text> <Response>:
std::string render_prompt(const TaskSpec& task, const Instance& instance,
                          std::span<const Exemplar> exemplars = {});

struct Prompt {
  std::string item_id;
  std::string text;

  bool operator==(const Prompt&) const = default;
};

/// JSONL lines {"item_id","prompt"}.
void write_prompts_jsonl(std::ostream& out, std::span<const Prompt> prompts);
std::vector<Prompt> read_prompts_jsonl(std::istream& in);

struct ReplayTransport {
  std::filesystem::path store;  // JSONL {annotator_id, item_id, response}
};

struct HttpTransport {
  std::string url;  // http://host[:port]/path, POST {"prompt"} -> {"text"}
  double timeout_seconds = 60.0;
  std::size_t retries = 2;
};

struct Endpoint {
  std::string id;
  std::variant<ReplayTransport, HttpTransport> transport;
  std::size_t max_in_flight = 4;
};

struct AnnotateResult {
  std::vector<AnnotationRecord> records;  // raw only, in prompt order
  std::vector<std::string> missing;       // item ids without a response
  std::size_t warnings = 0;
};

/// Collects one raw response per prompt. Unanswered prompts become missing
/// cells with a warning on `log`; a malformed replay store throws DataError,
/// and an HTTP endpoint that answers no prompt at all throws TransportError.
AnnotateResult annotate(const Endpoint& endpoint, std::span<const Prompt> prompts,
                        std::ostream& log);

}  // namespace annotagg::prompts
