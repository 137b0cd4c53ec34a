#include <httplib.h>

#include "errors.hpp"
#include "instantiate.hpp"
#include "util.hpp"

namespace moar {

namespace {

constexpr const char* kSystemPrompt =
    "You are an expert at optimizing LLM-powered data processing pipelines. "
    "Respond with a single JSON object and nothing else.";

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

ParsedUrl parse_url(const std::string& url) {
  std::string rest = url;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  else if (rest.rfind("https://", 0) == 0)
    fail(ErrorKind::Endpoint, "https endpoints are not supported: " + url);
  ParsedUrl out;
  size_t slash = rest.find('/');
  std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
  if (slash != std::string::npos) out.path = rest.substr(slash);
  size_t colon = authority.find(':');
  if (colon == std::string::npos) {
    out.host = authority;
  } else {
    out.host = authority.substr(0, colon);
    out.port = std::stoi(authority.substr(colon + 1));
  }
  if (out.host.empty()) fail(ErrorKind::Endpoint, "bad endpoint URL: " + url);
  return out;
}

/// Two-step progressive disclosure over JSON messages. Stage 1 sends only
/// directive names, descriptions, and use-case guidance; stage 2 loads the
/// chosen directive's full documentation on demand. Instantiation is an
/// interactive loop: the agent may call read_next_doc (encoded as a JSON
/// action) or emit parameters; schema violations are echoed back until valid
/// or the retry limit is reached.
class AgentInstantiator : public Instantiator {
 public:
  AgentInstantiator(std::string endpoint, ModelCatalog catalog, int retry_limit)
      : url_(parse_url(endpoint)), catalog_(std::move(catalog)), retry_limit_(retry_limit) {}

  Choice choose(const ChooseRequest& req) override {
    Json stage1{{"stage", "choose_directive"},
                {"pipeline_yaml", req.context.pipeline_yaml},
                {"directive_briefs", req.context.directive_briefs},
                {"explored_paths", paths_json(req.context)},
                {"current_path", req.context.current_path},
                {"depth", req.context.depth},
                {"model_stats", model_stats_json(req.context)},
                {"directive_stats", directive_stats_json(req.context)},
                {"objective", to_string(req.context.objective)}};
    Json messages = Json::array();
    messages.push_back({{"role", "system"}, {"content", kSystemPrompt}});
    messages.push_back({{"role", "user"}, {"content", stage1.dump()}});
    Json reply = post_messages(messages);
    Json content = parse_content(reply);
    if (!content.contains("directive") || !content.contains("span"))
      fail(ErrorKind::Parse, "agent stage-1 reply lacks directive/span");
    std::string name = content["directive"].get<std::string>();
    bool allowed = std::any_of(req.allowed.begin(), req.allowed.end(),
                               [&](const Directive* d) { return d->name == name; });
    if (!allowed)
      fail(ErrorKind::Parse, "agent chose a directive outside the pruned list: " + name);
    const auto& span = content["span"];
    return Choice{name, Span{span.at(0).get<int>(), span.at(1).get<int>()}};
  }

  std::vector<Json> instantiate(const Directive& d, const PipelineSpec& p, Span span,
                                Objective objective, DocPeek* peek) override {
    Json stage2{{"stage", "instantiate_directive"},
                {"directive",
                 Json{{"name", d.name},
                      {"full_doc", d.full_doc},
                      {"instantiation_schema", d.param_schema.describe()},
                      {"candidate_count", d.candidate_count}}},
                {"pipeline_yaml", pipeline_to_yaml(p)},
                {"span", Json::array({span.start, span.end})},
                {"objective", to_string(objective)}};
    Json messages = Json::array();
    messages.push_back({{"role", "system"}, {"content", kSystemPrompt}});
    messages.push_back({{"role", "user"}, {"content", stage2.dump()}});

    int validation_failures = 0;
    int round_trips = 0;
    while (true) {
      if (++round_trips > 20)
        fail(ErrorKind::InstantiationFailed, d.name + ": agent conversation too long");
      Json reply = post_messages(messages);
      messages.push_back(reply);
      Json content = parse_content(reply);
      if (content.value("action", "") == "read_next_doc") {
        Json doc = Json(nullptr);
        if (peek != nullptr) {
          if (auto next = peek->read_next_doc()) doc = *next;
        }
        Json tool{{"document", doc}, {"end_of_sample", doc.is_null()}};
        messages.push_back({{"role", "user"}, {"content", tool.dump()}});
        continue;
      }
      std::vector<Json> candidates;
      if (content.contains("candidates")) {
        for (const auto& c : content["candidates"]) candidates.push_back(c);
      } else if (content.contains("params")) {
        candidates.push_back(content["params"]);
      }
      std::string error;
      if (int(candidates.size()) != d.candidate_count) {
        error = "expected exactly " + std::to_string(d.candidate_count) +
                " candidate parameter object(s), got " + std::to_string(candidates.size());
      } else {
        ParamContext ctx{p, span, &catalog_};
        for (size_t i = 0; i < candidates.size() && error.empty(); ++i) {
          std::string e = d.param_schema.validate(candidates[i], ctx);
          if (!e.empty()) error = "candidate " + std::to_string(i) + ": " + e;
        }
      }
      if (error.empty()) return candidates;
      if (++validation_failures >= retry_limit_)
        fail(ErrorKind::InstantiationFailed,
             d.name + ": validation failed " + std::to_string(validation_failures) +
                 " times; last error: " + error);
      Json feedback{{"error", error}, {"hint", "fix the parameters and resend"}};
      messages.push_back({{"role", "user"}, {"content", feedback.dump()}});
    }
  }

  bool agent_override() const override { return true; }

 private:
  static Json paths_json(const AgentContext& ctx) {
    Json arr = Json::array();
    for (const auto& e : ctx.explored_paths)
      arr.push_back({{"path", e.path}, {"cost", e.cost.dollars()}, {"accuracy", e.accuracy}});
    return arr;
  }

  static Json model_stats_json(const AgentContext& ctx) {
    Json obj = Json::object();
    for (const auto& [model, stat] : ctx.model_stats)
      obj[model] = {{"cost", stat.cost.dollars()}, {"accuracy", stat.accuracy}};
    return obj;
  }

  static Json directive_stats_json(const AgentContext& ctx) {
    Json obj = Json::object();
    for (const auto& [name, stat] : ctx.directive_stats)
      obj[name] = {{"mean_cost_delta", stat.mean_cost_delta_dollars},
                   {"mean_accuracy_delta", stat.mean_accuracy_delta},
                   {"samples", stat.samples}};
    return obj;
  }

  Json post_messages(const Json& messages) {
    httplib::Client client(url_.host, url_.port);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    Json body{{"messages", messages}};
    auto res = client.Post(url_.path, body.dump(), "application/json");
    if (!res)
      fail(ErrorKind::Endpoint,
           "agent endpoint unreachable: " + url_.host + ":" + std::to_string(url_.port));
    if (res->status != 200)
      fail(ErrorKind::Endpoint, "agent endpoint returned HTTP " + std::to_string(res->status));
    try {
      return Json::parse(res->body);
    } catch (const Json::exception& e) {
      fail(ErrorKind::Parse, std::string("agent reply is not JSON: ") + e.what());
    }
  }

  static Json parse_content(const Json& reply) {
    if (!reply.is_object() || !reply.contains("content"))
      fail(ErrorKind::Parse, "agent reply lacks a content field");
    const Json& content = reply["content"];
    if (content.is_object()) return content;
    try {
      return Json::parse(content.get<std::string>());
    } catch (const Json::exception& e) {
      fail(ErrorKind::Parse, std::string("agent message content is not JSON: ") + e.what());
    }
  }

  ParsedUrl url_;
  ModelCatalog catalog_;
  int retry_limit_;
};

}  // namespace

std::unique_ptr<Instantiator> make_agent_instantiator(const std::string& endpoint,
                                                      ModelCatalog catalog, int retry_limit) {
  return std::make_unique<AgentInstantiator>(endpoint, std::move(catalog), retry_limit);
}

}  // namespace moar
