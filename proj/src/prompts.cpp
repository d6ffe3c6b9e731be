#include "annotagg/prompts.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include <httplib.h>

#include "annotagg/error.hpp"

namespace annotagg::prompts {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kPlaceholder = "{text}";

std::string_view trim(std::string_view s) {
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower_ascii(std::string s) {
  for (auto& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

std::string block(const TaskSpec& task, std::string_view text, const std::string* label) {
  std::string out;
  if (task.style() == Style::plain) {
    out = task.fill(text);
    out += "\nAnswer:";
  } else {
    out = "<Definition> ";
    out += task.definition();
    out += " <Input> ";
    out += text;
    out += " <Response>:";
  }
  if (label) {
    out += ' ';
    out += *label;
  }
  return out;
}

}  // namespace

TaskSpec::TaskSpec(std::string name, std::string instruction, LabelSpace labels, Style style,
                   bool closed_set)
    : name_(std::move(name)),
      instruction_(std::move(instruction)),
      labels_(std::move(labels)),
      style_(style),
      closed_set_(closed_set) {
  const auto first = instruction_.find(kPlaceholder);
  if (first == std::string::npos)
    throw UsageError("task '" + name_ + "': instruction lacks the {text} placeholder");
  if (instruction_.find(kPlaceholder, first + 1) != std::string::npos)
    throw UsageError("task '" + name_ + "': instruction has more than one {text} placeholder");
  placeholder_ = first;
  if (closed_set_) {
    const std::string lowered = lower_ascii(instruction_);
    for (const auto& label : labels_.labels())
      if (lowered.find(lower_ascii(label)) == std::string::npos)
        throw UsageError("task '" + name_ + "': label '" + label +
                         "' does not appear in the instruction");
  }
}

TaskSpec TaskSpec::from_json(const json& j) {
  try {
    std::map<std::string, std::string> aliases;
    if (j.contains("aliases")) aliases = j.at("aliases").get<std::map<std::string, std::string>>();
    const std::string style = j.value("style", "plain");
    Style s;
    if (style == "plain")
      s = Style::plain;
    else if (style == "field_template")
      s = Style::field_template;
    else
      throw UsageError("unknown prompt style '" + style + "'");
    TaskSpec t(j.at("name").get<std::string>(), j.at("instruction").get<std::string>(),
               LabelSpace(j.at("labels").get<std::vector<std::string>>(), aliases), s,
               j.value("closed_set", true));
    t.aliases_ = std::move(aliases);
    return t;
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid task spec: ") + e.what());
  }
}

TaskSpec TaskSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open task spec '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json TaskSpec::to_json() const {
  json j;
  j["name"] = name_;
  j["instruction"] = instruction_;
  j["labels"] = labels_.labels();
  if (!aliases_.empty()) j["aliases"] = aliases_;
  j["style"] = style_ == Style::plain ? "plain" : "field_template";
  j["closed_set"] = closed_set_;
  return j;
}

std::string TaskSpec::fill(std::string_view text) const {
  std::string out = instruction_.substr(0, placeholder_);
  out += text;
  out += instruction_.substr(placeholder_ + kPlaceholder.size());
  return out;
}

std::string TaskSpec::definition() const {
  const auto before = trim(std::string_view(instruction_).substr(0, placeholder_));
  const auto after = trim(std::string_view(instruction_).substr(placeholder_ + kPlaceholder.size()));
  std::string out(before);
  if (!before.empty() && !after.empty()) out += ' ';
  out += after;
  return out;
}

std::string render_prompt(const TaskSpec& task, const Instance& instance,
                          std::span<const Exemplar> exemplars) {
  std::string out;
  for (const auto& ex : exemplars) {
    if (ex.label >= task.label_space().size())
      throw UsageError("exemplar label outside the task's label space");
    out += block(task, ex.text, &task.label_space().name(ex.label));
    out += "\n\n";
  }
  out += block(task, instance.text, nullptr);
  return out;
}

void write_prompts_jsonl(std::ostream& out, std::span<const Prompt> prompts) {
  for (const auto& p : prompts) {
    json j;
    j["item_id"] = p.item_id;
    j["prompt"] = p.text;
    out << j.dump() << '\n';
  }
}

std::vector<Prompt> read_prompts_jsonl(std::istream& in) {
  std::vector<Prompt> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    try {
      const auto j = json::parse(text);
      out.push_back({j.at("item_id").get<std::string>(), j.at("prompt").get<std::string>()});
    } catch (const json::exception& e) {
      throw DataError("prompts line " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

namespace {

class Warner {
 public:
  explicit Warner(std::ostream& log) : log_(log) {}
  void warn(const std::string& message) {
    std::lock_guard lock(mutex_);
    log_ << "warning: " << message << '\n';
    ++count_;
  }
  std::size_t count() const { return count_; }

 private:
  std::ostream& log_;
  std::mutex mutex_;
  std::size_t count_ = 0;
};

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http")
    throw UsageError("endpoint URL must start with http://, got '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::vector<std::optional<std::string>> replay(const Endpoint& ep, const ReplayTransport& t,
                                               std::span<const Prompt> prompts) {
  std::ifstream in(t.store);
  if (!in) throw DataError("cannot open replay store '" + t.store.string() + "'");
  std::map<std::string, std::string> responses;  // item id -> response for this annotator
  std::vector<AnnotationRecord> rows;
  try {
    rows = read_responses_jsonl(in);
  } catch (const DataError& e) {
    throw DataError(t.store.string() + ": " + e.what());
  }
  for (auto& r : rows) {
    if (r.annotator_id != ep.id) continue;
    if (!responses.emplace(r.item_id, std::move(r.raw)).second)
      throw DataError(t.store.string() + ": duplicate response for annotator '" + ep.id +
                      "' and item '" + r.item_id + "'");
  }
  std::vector<std::optional<std::string>> out(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i)
    if (auto it = responses.find(prompts[i].item_id); it != responses.end()) out[i] = it->second;
  return out;
}

std::vector<std::optional<std::string>> over_http(const Endpoint& ep, const HttpTransport& t,
                                                  std::span<const Prompt> prompts, Warner& warner) {
  const auto url = parse_url(t.url);
  std::vector<std::optional<std::string>> out(prompts.size());
  std::atomic<std::size_t> next{0};
  const auto seconds = static_cast<time_t>(t.timeout_seconds);
  const auto micros = static_cast<time_t>((t.timeout_seconds - static_cast<double>(seconds)) * 1e6);

  auto worker = [&] {
    httplib::Client client(url.origin);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      const std::string body = json{{"prompt", prompts[i].text}}.dump();
      std::string last_error;
      for (std::size_t attempt = 0; attempt <= t.retries; ++attempt) {
        auto res = client.Post(url.path, body, "application/json");
        if (!res) {
          last_error = httplib::to_string(res.error());
          continue;
        }
        if (res->status != 200) {
          last_error = "HTTP status " + std::to_string(res->status);
          continue;
        }
        try {
          const auto j = json::parse(res->body);
          out[i] = j.at("text").get<std::string>();
          break;
        } catch (const json::exception& e) {
          last_error = std::string("malformed response body: ") + e.what();
        }
      }
      if (!out[i])
        warner.warn("annotator '" + ep.id + "' gave no response for item '" + prompts[i].item_id +
                    "' after " + std::to_string(t.retries + 1) + " attempts (" + last_error + ")");
    }
  };

  const std::size_t workers =
      std::clamp<std::size_t>(ep.max_in_flight, 1, std::max<std::size_t>(prompts.size(), 1));
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  return out;
}

}  // namespace

AnnotateResult annotate(const Endpoint& endpoint, std::span<const Prompt> prompts,
                        std::ostream& log) {
  Warner warner(log);
  std::vector<std::optional<std::string>> responses;
  bool http = false;
  if (const auto* r = std::get_if<ReplayTransport>(&endpoint.transport)) {
    responses = replay(endpoint, *r, prompts);
    for (std::size_t i = 0; i < prompts.size(); ++i)
      if (!responses[i])
        warner.warn("replay store has no response from '" + endpoint.id + "' for item '" +
                    prompts[i].item_id + "'");
  } else {
    http = true;
    responses = over_http(endpoint, std::get<HttpTransport>(endpoint.transport), prompts, warner);
  }

  AnnotateResult result;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (responses[i])
      result.records.push_back({prompts[i].item_id, endpoint.id, std::move(*responses[i]), {}, false});
    else
      result.missing.push_back(prompts[i].item_id);
  }
  result.warnings = warner.count();
  if (http && !prompts.empty() && result.records.empty())
    throw TransportError("annotator '" + endpoint.id + "' answered none of " +
                         std::to_string(prompts.size()) + " prompts");
  return result;
}

}  // namespace annotagg::prompts
