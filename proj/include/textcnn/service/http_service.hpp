#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "textcnn/qa/registry.hpp"

namespace textcnn::service {

using nlohmann::json;

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::string data_dir;  // empty keeps every domain in memory only
    nn::HyperParams default_hp = qa::default_domain_hyperparams();
    std::size_t max_body_bytes = 1 << 20;
    std::vector<std::string> cors_origins;  // "*" allows any origin
    std::size_t threads = 8;
    std::size_t max_tickets = 10000;  // answers remembered for feedback

    /// TEXTCNN_PORT and TEXTCNN_DATA_DIR override the fields when set.
    void apply_env() {
        if (const char* p = std::getenv("TEXTCNN_PORT"); p && *p) {
            try {
                std::size_t used = 0;
                port = std::stoi(p, &used);
                if (used != std::string(p).size()) throw std::invalid_argument(p);
            } catch (const std::exception&) {
                throw InvalidArgument(std::string("TEXTCNN_PORT is not an integer: ") + p);
            }
        }
        if (const char* d = std::getenv("TEXTCNN_DATA_DIR"); d && *d) data_dir = d;
    }

    void validate() const {
        if (port < 0 || port > 65535) throw InvalidArgument("port must be in [0, 65535]");
        if (max_body_bytes == 0) throw InvalidArgument("max_body_bytes must be positive");
        if (threads == 0) throw InvalidArgument("threads must be >= 1");
        default_hp.validate();
        if (data_dir.empty()) return;
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(data_dir, ec);
        const fs::path probe = fs::path(data_dir) / ".write_probe";
        {
            std::ofstream out(probe);
            if (!out || !(out << "ok")) throw IoError("data directory '" + data_dir + "' is not writable");
        }
        fs::remove(probe, ec);
    }
};

inline double round6(double x) { return std::round(x * 1e6) / 1e6; }

inline int http_status_for(const std::string& code) {
    static const std::map<std::string, int> table{
        {"UNKNOWN_DOMAIN", 404},         {"UNKNOWN_REQUEST", 404},    {"NOT_FOUND", 404},
        {"DOMAIN_EXISTS", 409},          {"NOT_INGESTED", 409},       {"NOT_TRAINED", 409},
        {"NO_TRAINED_DOMAIN", 409},      {"TRAINING_IN_PROGRESS", 409}, {"FEEDBACK_ALREADY_GIVEN", 409},
        {"EMPTY_KB", 409},               {"PAYLOAD_TOO_LARGE", 413},  {"METHOD_NOT_ALLOWED", 405},
        {"INTERNAL", 500},               {"STORAGE_ERROR", 500},
    };
    if (auto it = table.find(code); it != table.end()) return it->second;
    return 400;
}

inline json error_body(const std::string& code, const std::string& message) {
    return json{{"error", {{"code", code}, {"message", message}}}};
}

inline json summary_json(const qa::DomainSummary& s) {
    json cats = json::array();
    for (std::size_t c = 0; c < s.categories.size(); ++c) {
        cats.push_back({{"name", s.categories[c]}, {"entries", s.entries_per_category[c]}});
    }
    return json{{"id", s.id},
                {"status", s.training ? std::string("training") : qa::to_string(s.status)},
                {"version", s.version},
                {"categories", cats},
                {"kb_size", s.kb_size},
                {"learned", s.learned},
                {"vocab_size", s.vocab_size}};
}

/// Answer fields shared by the HTTP and command-line front ends.
inline json answer_json(const qa::Answer& a) {
    return json{{"answer", a.text},
                {"category", a.category},
                {"confidence", round6(a.confidence)},
                {"similarity", round6(a.similarity)},
                {"domain_id", a.domain_id},
                {"fallback", a.fallback},
                {"entry_index", a.entry_index},
                {"snapshot_version", a.snapshot_version}};
}

/// JSON API over a DomainRegistry. Training requests run on background
/// threads; everything else answers synchronously.
class QaService {
public:
    explicit QaService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        registry_ = std::make_unique<qa::DomainRegistry>(cfg_.data_dir);
        std::random_device rd;
        salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        setup();
    }

    ~QaService() { stop(); }

    QaService(const QaService&) = delete;
    QaService& operator=(const QaService&) = delete;

    qa::DomainRegistry& registry() { return *registry_; }
    const ServiceConfig& config() const { return cfg_; }

    /// Binds and serves on a background thread. Returns the bound port.
    int start() {
        if (listener_.joinable()) throw Error("service already started");
        if (cfg_.port == 0) {
            port_ = server_.bind_to_any_port(cfg_.host);
        } else {
            port_ = server_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
        }
        if (port_ < 0) {
            throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
        }
        listener_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    /// Serves on the calling thread until stop() is called elsewhere.
    void run() {
        if (cfg_.port == 0) {
            port_ = server_.bind_to_any_port(cfg_.host);
        } else {
            port_ = server_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
        }
        if (port_ < 0) {
            throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
        }
        server_.listen_after_bind();
    }

    /// Stops accepting requests and waits for running training jobs.
    void stop() {
        server_.stop();
        if (listener_.joinable()) listener_.join();
        std::map<std::string, std::shared_ptr<Job>> jobs;
        {
            std::lock_guard lock(jobs_mutex_);
            jobs.swap(jobs_);
        }
        for (auto& [id, job] : jobs) {
            if (job->thread.joinable()) job->thread.join();
        }
    }

    int port() const { return port_; }

    /// Blocks until no training job of `id` is running.
    void wait_for_training(const std::string& id) {
        std::shared_ptr<Job> job;
        {
            std::lock_guard lock(jobs_mutex_);
            if (auto it = jobs_.find(id); it != jobs_.end()) job = it->second;
        }
        if (job) {
            std::unique_lock lk(job->done_mutex);
            job->done_cv.wait(lk, [&] { return !job->running.load(); });
        }
    }

private:
    struct Job {
        std::thread thread;
        std::atomic<bool> running{true};
        std::atomic<std::size_t> step{0};
        std::atomic<std::size_t> total{0};
        std::mutex done_mutex;
        std::condition_variable done_cv;
        std::string state = "running";  // guarded by done_mutex
        std::string error;
    };

    struct Ticket {
        std::string domain_id;
        std::string question;
        qa::Answer answer;
        bool used = false;
    };

    static void send(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static json parse_object(const httplib::Request& req) {
        json j = json::parse(req.body, nullptr, false);
        if (j.is_discarded()) throw qa::QaError("MALFORMED_JSON", "request body is not valid JSON");
        if (!j.is_object()) throw qa::QaError("BAD_REQUEST", "request body must be a JSON object");
        return j;
    }

    static std::string string_field(const json& j, const char* key) {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw qa::QaError("BAD_REQUEST", std::string("field '") + key + "' must be a string");
        }
        return j.at(key).get<std::string>();
    }

    std::string next_request_id() {
        const std::uint64_t n = ++request_counter_;
        char buf[40];
        std::snprintf(buf, sizeof buf, "req-%016llx", static_cast<unsigned long long>(mix64(salt_ + n)));
        return buf;
    }

    json domain_json(const qa::Domain& d) {
        json j = summary_json(d.summary());
        std::shared_ptr<Job> job;
        {
            std::lock_guard lock(jobs_mutex_);
            if (auto it = jobs_.find(d.id()); it != jobs_.end()) job = it->second;
        }
        if (job) {
            std::lock_guard lk(job->done_mutex);
            if (job->running) j["status"] = "training";
            j["training"] = {{"state", job->state},
                             {"step", job->step.load()},
                             {"total_steps", job->total.load()},
                             {"error", job->error.empty() ? json(nullptr) : json(job->error)}};
        } else {
            j["training"] = nullptr;
        }
        return j;
    }

    bool job_running(const std::string& id) {
        std::lock_guard lock(jobs_mutex_);
        auto it = jobs_.find(id);
        return it != jobs_.end() && it->second->running;
    }

    /// Wraps a handler so every failure becomes a JSON error response.
    template <typename F>
    httplib::Server::Handler guarded(F f) {
        return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const qa::QaError& e) {
                send(res, http_status_for(e.code()), error_body(e.code(), e.what()));
            } catch (const json::exception& e) {
                send(res, 400, error_body("BAD_REQUEST", e.what()));
            } catch (const InvalidArgument& e) {
                send(res, 400, error_body("INVALID_ARGUMENT", e.what()));
            } catch (const IoError& e) {
                send(res, 500, error_body("STORAGE_ERROR", e.what()));
            }
        };
    }

    void setup() {
        server_.set_payload_max_length(cfg_.max_body_bytes);
        const std::size_t n = cfg_.threads;
        server_.new_task_queue = [n] { return new httplib::ThreadPool(n); };

        server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string msg = "unexpected failure";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                msg = e.what();
            } catch (...) {
            }
            send(res, 500, error_body("INTERNAL", msg));
        });

        // Fills a JSON body for errors the HTTP layer raises on its own.
        server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
            std::string code = "BAD_REQUEST";
            if (res.status == 404) code = "NOT_FOUND";
            if (res.status == 413) code = "PAYLOAD_TOO_LARGE";
            if (res.status == 405) code = "METHOD_NOT_ALLOWED";
            if (res.status >= 500) code = "INTERNAL";
            res.set_content(error_body(code, httplib::status_message(res.status)).dump(), "application/json");
            return httplib::Server::HandlerResponse::Handled;
        });

        server_.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_header("Origin")) return;
            const auto origin = req.get_header_value("Origin");
            for (const auto& allowed : cfg_.cors_origins) {
                if (allowed == "*" || allowed == origin) {
                    res.set_header("Access-Control-Allow-Origin", allowed == "*" ? "*" : origin);
                    res.set_header("Vary", "Origin");
                    return;
                }
            }
        });

        server_.Options(".*", [this](const httplib::Request& req, httplib::Response& res) {
            res.status = 204;
            if (!cfg_.cors_origins.empty() && req.has_header("Origin")) {
                res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
                res.set_header("Access-Control-Allow-Headers", "Content-Type");
                res.set_header("Access-Control-Max-Age", "600");
            }
        });

        server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            send(res, 200, json{{"status", "ok"}});
        });

        server_.Get("/domains", guarded([this](const httplib::Request&, httplib::Response& res) {
            json list = json::array();
            for (const auto& d : registry_->all()) list.push_back(domain_json(*d));
            send(res, 200, json{{"domains", list}});
        }));

        server_.Post("/domains", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_object(req);
            auto d = registry_->create(string_field(body, "id"));
            send(res, 201, domain_json(*d));
        }));

        server_.Get(R"(/domains/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, domain_json(*registry_->get(req.matches[1].str())));
        }));

        server_.Post(R"(/domains/([^/]+)/documents)",
                     guarded([this](const httplib::Request& req, httplib::Response& res) {
                         auto d = registry_->get(req.matches[1].str());
                         const auto body = parse_object(req);
                         if (!body.contains("items") || !body.at("items").is_array()) {
                             throw qa::QaError("BAD_REQUEST", "field 'items' must be an array");
                         }
                         std::vector<text::LabeledText> docs;
                         for (const auto& item : body.at("items")) {
                             if (!item.is_object()) {
                                 throw qa::QaError("BAD_REQUEST", "every item must be an object");
                             }
                             docs.push_back({string_field(item, "text"), string_field(item, "category")});
                         }
                         if (job_running(d->id())) {
                             throw qa::QaError("TRAINING_IN_PROGRESS", "domain '" + d->id() + "' is training");
                         }
                         const auto before = d->snapshot()->kb.size();
                         d->ingest(docs);
                         json out = domain_json(*d);
                         out["added"] = d->snapshot()->kb.size() - before;
                         send(res, 200, out);
                     }));

        server_.Post(R"(/domains/([^/]+)/train)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto d = registry_->get(req.matches[1].str());
            nn::HyperParams hp = cfg_.default_hp;
            if (!req.body.empty()) {
                const auto body = parse_object(req);
                if (body.contains("hyperparams") && !body.at("hyperparams").is_null()) {
                    try {
                        from_json(body.at("hyperparams"), hp);
                        hp.validate();
                    } catch (const std::exception& e) {
                        throw qa::QaError("INVALID_HYPERPARAMS", e.what());
                    }
                }
            }
            start_training(d, hp);
            send(res, 202, domain_json(*d));
        }));

        server_.Post("/ask", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto body = parse_object(req);
            const auto question = string_field(body, "question");
            std::optional<std::string> domain_id;
            if (body.contains("domain_id") && !body.at("domain_id").is_null()) {
                domain_id = string_field(body, "domain_id");
            }
            qa::Answer a;
            if (domain_id) {
                auto d = registry_->get(*domain_id);
                a = qa::retrieve_answer(*d->snapshot(), question);
            } else {
                a = registry_->answer_general(question);
            }
            const auto id = next_request_id();
            remember(id, Ticket{a.domain_id, question, a, false});
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            json out = answer_json(a);
            out["request_id"] = id;
            out["latency_ms"] = round6(ms);
            send(res, 200, out);
        }));

        server_.Post("/feedback", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_object(req);
            const auto id = string_field(body, "request_id");
            if (!body.contains("accepted") || !body.at("accepted").is_boolean()) {
                throw qa::QaError("BAD_REQUEST", "field 'accepted' must be a boolean");
            }
            const bool accepted = body.at("accepted").get<bool>();
            Ticket t;
            {
                std::lock_guard lock(tickets_mutex_);
                auto it = tickets_.find(id);
                if (it == tickets_.end()) throw qa::QaError("UNKNOWN_REQUEST", "no answer with id '" + id + "'");
                if (it->second.used) {
                    throw qa::QaError("FEEDBACK_ALREADY_GIVEN", "feedback for '" + id + "' was already recorded");
                }
                it->second.used = true;
                t = it->second;
            }
            bool learned = false;
            try {
                learned = registry_->get(t.domain_id)->kb_learn(t.question, t.answer, accepted);
            } catch (...) {
                std::lock_guard lock(tickets_mutex_);
                if (auto it = tickets_.find(id); it != tickets_.end()) it->second.used = false;
                throw;
            }
            auto snap = registry_->get(t.domain_id)->snapshot();
            send(res, 200,
                 json{{"request_id", id},
                      {"accepted", accepted},
                      {"learned", learned},
                      {"domain_id", t.domain_id},
                      {"kb_size", snap->kb.size()},
                      {"snapshot_version", snap->version}});
        }));
    }

    void remember(const std::string& id, Ticket t) {
        std::lock_guard lock(tickets_mutex_);
        tickets_.emplace(id, std::move(t));
        ticket_order_.push_back(id);
        while (ticket_order_.size() > cfg_.max_tickets) {
            tickets_.erase(ticket_order_.front());
            ticket_order_.pop_front();
        }
    }

    void start_training(const std::shared_ptr<qa::Domain>& d, const nn::HyperParams& hp) {
        std::lock_guard lock(jobs_mutex_);
        const auto id = d->id();
        if (auto it = jobs_.find(id); it != jobs_.end()) {
            if (it->second->running) {
                throw qa::QaError("TRAINING_IN_PROGRESS", "domain '" + id + "' is already training");
            }
            if (it->second->thread.joinable()) it->second->thread.join();
        }
        if (d->snapshot()->status == qa::DomainStatus::Created) {
            throw qa::QaError("NOT_INGESTED", "domain '" + id + "' has no documents");
        }
        auto job = std::make_shared<Job>();
        Job* raw = job.get();
        job->thread = std::thread([d, hp, raw] {
            std::string state = "done";
            std::string error;
            try {
                train::TrainOptions<double> opt;
                opt.on_step = [raw](std::size_t step, std::size_t total) {
                    raw->step = step;
                    raw->total = total;
                };
                d->train(hp, std::move(opt));
            } catch (const std::exception& e) {
                state = "failed";
                error = e.what();
            }
            {
                std::lock_guard lk(raw->done_mutex);
                raw->state = state;
                raw->error = error;
                raw->running = false;
            }
            raw->done_cv.notify_all();
        });
        jobs_[id] = std::move(job);
    }

    ServiceConfig cfg_;
    std::unique_ptr<qa::DomainRegistry> registry_;
    httplib::Server server_;
    std::thread listener_;
    int port_ = -1;

    std::uint64_t salt_ = 0;
    std::atomic<std::uint64_t> request_counter_{0};

    std::mutex tickets_mutex_;
    std::unordered_map<std::string, Ticket> tickets_;
    std::deque<std::string> ticket_order_;

    std::mutex jobs_mutex_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
};

}  // namespace textcnn::service
