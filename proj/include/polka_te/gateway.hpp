#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "polka_te/controller.hpp"

namespace httplib {
class Server;
}

namespace polka_te {

/// HTTP front of a Controller. Reads are served from snapshots; every mutating
/// request goes through the controller's command methods. /events streams bus
/// messages as server-sent events.
class Gateway {
public:
    explicit Gateway(Controller& controller);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

private:
    void routes();

    Controller& ctl_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
    int port_ = 0;
};

}  // namespace polka_te
