#include "memlabel/http_service.hpp"

#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "memlabel/error.hpp"

namespace memlabel {

namespace fs = std::filesystem;
using nlohmann::json;

struct LabelService::Impl {
    LabelSession& session;
    ServiceOptions options;
    httplib::Server server;
    std::thread worker;
    bool bound = false;
    int port = 0;

    Impl(LabelSession& s, ServiceOptions o) : session(s), options(std::move(o)) { routes(); }

    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static std::string preview_url(const std::string& sample_id) { return "/samples/" + sample_id + "/preview"; }

    void routes() {
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                reply(res, 500, {{"error", e.what()}});
            } catch (...) {
                reply(res, 500, {{"error", "internal error"}});
            }
        });
        server.Get("/session", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, 200,
                  {{"id", session.id()},
                   {"label_space", session.label_space().classes()},
                   {"budget", {{"N_L", session.max_labels()}, {"consumed", session.consumed()}}},
                   {"status", std::string(to_string(session.status()))}});
        });

        server.Get("/queries/pending", [this](const httplib::Request& req, httplib::Response& res) {
            std::size_t limit = SIZE_MAX;
            if (req.has_param("limit")) {
                try {
                    const long v = std::stol(req.get_param_value("limit"));
                    if (v < 0) throw std::invalid_argument("negative");
                    limit = static_cast<std::size_t>(v);
                } catch (const std::exception&) {
                    return reply(res, 422, {{"error", "limit must be a non-negative integer"}});
                }
            }
            json out = json::array();
            for (const auto& q : session.pending(limit))
                out.push_back({{"query_id", q.query_id},
                               {"sample_id", q.sample_id},
                               {"seed", q.seed},
                               {"preview_url", preview_url(q.sample_id)}});
            reply(res, 200, out);
        });

        server.Get("/samples/:id/preview", [this](const httplib::Request& req, httplib::Response& res) {
            const auto id = req.path_params.at("id");
            if (!options.preview_dir.empty() && id.find('/') == std::string::npos && id != ".." && id != ".") {
                static const std::pair<const char*, const char*> types[] = {
                    {".png", "image/png"}, {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"},
                    {".gif", "image/gif"}, {".bmp", "image/bmp"},  {".webp", "image/webp"}};
                for (const auto& [ext, type] : types) {
                    const auto path = fs::path(options.preview_dir) / (id + ext);
                    if (!fs::is_regular_file(path)) continue;
                    std::ifstream in(path, std::ios::binary);
                    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
                    res.status = 200;
                    res.set_content(bytes, type);
                    return;
                }
            }
            if (options.dataset) {
                const auto idx = options.dataset->find(id);
                if (idx < options.dataset->size()) return reply(res, 200, (*options.dataset)[idx].values);
            }
            reply(res, 404, {{"error", "no preview for sample '" + id + "'"}});
        });

        server.Post("/labels", [this](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error&) {
                return reply(res, 422, {{"error", "body is not JSON"}});
            }
            if (!body.is_object() || !body.contains("query_id") || !body["query_id"].is_string() ||
                !body.contains("class_index") || !body["class_index"].is_number_integer())
                return reply(res, 422, {{"error", "expected {query_id: string, class_index: integer}"}});

            const auto query_id = body["query_id"].get<std::string>();
            const auto class_index = body["class_index"].get<long long>();
            const auto c = class_index < INT32_MIN || class_index > INT32_MAX ? -1 : static_cast<ClassIndex>(class_index);
            SubmitResult r;
            try {
                r = session.submit(query_id, c);
            } catch (const Error& e) {
                return reply(res, 500, {{"error", e.what()}});
            }
            switch (r.status) {
                case SubmitStatus::accepted:
                    return reply(res, 200, {{"accepted", true}, {"consumed", r.consumed}});
                case SubmitStatus::unknown_query:
                    return reply(res, 404, {{"accepted", false}, {"error", "unknown query '" + query_id + "'"}});
                case SubmitStatus::duplicate:
                    return reply(res, 409, {{"accepted", false}, {"consumed", r.consumed}, {"error", "query already labeled"}});
                case SubmitStatus::over_budget:
                    return reply(res, 409, {{"accepted", false}, {"consumed", r.consumed}, {"error", "labeling budget exhausted"}});
                case SubmitStatus::not_open:
                    return reply(res, 409, {{"accepted", false}, {"consumed", r.consumed}, {"error", "session aborted"}});
                case SubmitStatus::invalid_class:
                    return reply(res, 422, {{"accepted", false}, {"error", "class index out of range"}});
            }
        });

        server.Get("/progress", [this](const httplib::Request&, httplib::Response& res) {
            const auto p = session.progress();
            json per_seed = json::object();
            for (const auto& [seed, sp] : p.per_seed)
                per_seed[std::to_string(seed)] = {{"total", sp.total}, {"answered", sp.answered}};
            reply(res, 200,
                  {{"total_queries", p.total_queries},
                   {"answered", p.answered},
                   {"skipped", p.skipped},
                   {"complete", session.status() == SessionStatus::complete},
                   {"per_seed_counts", per_seed}});
        });

        if (!options.static_dir.empty()) server.set_mount_point("/", options.static_dir);
    }
};

LabelService::LabelService(LabelSession& session, ServiceOptions options)
    : impl_(std::make_unique<Impl>(session, std::move(options))) {}

LabelService::~LabelService() { stop(); }

int LabelService::bind() {
    if (impl_->bound) return impl_->port;
    if (impl_->options.port == 0) {
        impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
        if (impl_->port <= 0) throw Error("cannot bind " + impl_->options.host);
    } else {
        if (!impl_->server.bind_to_port(impl_->options.host, impl_->options.port))
            throw Error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
        impl_->port = impl_->options.port;
    }
    impl_->bound = true;
    return impl_->port;
}

void LabelService::run() {
    if (!impl_->bound) throw Error("label service is not bound");
    impl_->server.listen_after_bind();
}

int LabelService::start() {
    const int port = bind();
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void LabelService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace memlabel
