#pragma once

#include <httplib.h>

#include <atomic>
#include <mutex>
#include <string>
#include <thread>

#include "synthctx/dataset_io.hpp"
#include "synthctx/hash.hpp"

// Local HTTP server speaking the backend contract. Replies are a pure
// function of the request so cached and live runs agree.
class StubBackend {
  public:
    // fail_first: number of requests answered with HTTP 503 before serving.
    explicit StubBackend(int fail_first = 0) : fail_first_(fail_first) {
        server_.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = requests_++;
            if (n < fail_first_) {
                res.status = 503;
                return;
            }
            const auto body = synthctx::json::parse(req.body);
            {
                std::lock_guard lock(mu_);
                last_auth_ = req.get_header_value("Authorization");
            }
            const std::string user = body["messages"].back()["content"];
            synthctx::json reply;
            reply["text"] = respond(body["model"], user);
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~StubBackend() {
        server_.stop();
        thread_.join();
    }

    static std::string respond(const std::string& model, const std::string& user) {
        const std::string tag = synthctx::sha256_hex(model + "\n" + user).substr(0, 8);
        if (user.find("Question: [question]") != std::string::npos) {
            return "Title: Stub " + tag + "\nText: The stub record " + tag +
                   " was filed in Oskarvale.\nQuestion: Where was the stub record filed?\nAnswer: Oskarvale";
        }
        if (user.find("Title: [title]") != std::string::npos) {
            return "Title: Stub " + tag + "\nText: Stub sentence " + tag + ".";
        }
        if (user.find("multiple sentences") != std::string::npos) {
            return "The first part " + tag + " holds. The second part " + tag + " holds too.";
        }
        return "Stub rewrite " + tag + " of the request.";
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/complete"; }
    int requests() const { return requests_.load(); }
    std::string last_auth() const {
        std::lock_guard lock(mu_);
        return last_auth_;
    }

  private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    int fail_first_;
    std::atomic<int> requests_{0};
    mutable std::mutex mu_;
    std::string last_auth_;
};
